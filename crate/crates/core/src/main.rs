fn main() {
    std::process::exit(mdslam::cli::run(std::env::args_os()));
}
