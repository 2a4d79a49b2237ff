use std::path::Path;

use super::{camera_pose_at, render_frame, Scene, SimError, TrajectorySpec};
use crate::geometry::CameraIntrinsics;
use crate::io::{
    frame_path, write_depth, write_keypoints, write_mask, write_trajectory, DatasetError,
    SequenceConfig, Trajectory, FRAMES_DIR, GROUNDTRUTH, SEQUENCE_CFG,
};

/// Renders every frame of `spec` and writes a sequence directory.
///
/// Returns the sequence config that was written.
pub fn export_sequence(
    scene: &Scene,
    spec: &TrajectorySpec,
    k: &CameraIntrinsics,
    out_dir: &Path,
) -> Result<SequenceConfig, SimError> {
    spec.validate()?;
    let frames = out_dir.join(FRAMES_DIR);
    std::fs::create_dir_all(&frames).map_err(|e| DatasetError::io(&frames, e))?;
    let cfg = SequenceConfig {
        intrinsics: *k,
        fps: spec.fps,
        frame_count: spec.frame_count(),
    };
    let mut gt = Trajectory::new();
    for i in 0..cfg.frame_count {
        let t = cfg.timestamp(i);
        let pose = camera_pose_at(spec, t.min(spec.duration))?;
        let f = render_frame(scene, &pose, k, t)?;
        write_depth(&frame_path(out_dir, i, "depth"), &f.depth)?;
        write_mask(&frame_path(out_dir, i, "mask"), &f.mask)?;
        write_keypoints(&frame_path(out_dir, i, "kpts"), &f.keypoint_records())?;
        gt.push(t, pose.inverse());
    }
    write_trajectory(&out_dir.join(GROUNDTRUTH), &gt)?;
    let cfg_path = out_dir.join(SEQUENCE_CFG);
    std::fs::write(&cfg_path, cfg.to_kv().to_text()).map_err(|e| DatasetError::io(&cfg_path, e))?;
    Ok(cfg)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::io::SequenceDir;
    use crate::simulator::{build_scene, SceneConfig};

    fn small_cfg() -> SceneConfig {
        let mut cfg = SceneConfig {
            landmarks: 300,
            intrinsics: CameraIntrinsics::new(80.0, 80.0, 39.5, 29.5, 80, 60).unwrap(),
            ..Default::default()
        };
        cfg.trajectory.duration = 1.0;
        cfg
    }

    fn dir_bytes(root: &Path) -> Vec<(String, Vec<u8>)> {
        let mut out = Vec::new();
        for sub in [root.to_path_buf(), root.join(FRAMES_DIR)] {
            let mut names: Vec<_> = std::fs::read_dir(&sub)
                .unwrap()
                .map(|e| e.unwrap().path())
                .filter(|p| p.is_file())
                .collect();
            names.sort();
            for p in names {
                out.push((p.strip_prefix(root).unwrap().display().to_string(), std::fs::read(&p).unwrap()));
            }
        }
        out
    }

    #[test]
    fn one_second_at_thirty_fps() {
        let cfg = small_cfg();
        let scene = build_scene(&cfg, 5).unwrap();
        let tmp = tempfile::tempdir().unwrap();
        export_sequence(&scene, &cfg.trajectory, &cfg.intrinsics, tmp.path()).unwrap();
        let seq = SequenceDir::open(tmp.path()).unwrap();
        assert_eq!(seq.frame_count(), 30);
        assert_eq!(std::fs::read_dir(tmp.path().join(FRAMES_DIR)).unwrap().count(), 90);
        let gt = seq.groundtruth().unwrap();
        assert_eq!(gt.len(), 30);
        let p0 = camera_pose_at(&cfg.trajectory, 0.0).unwrap().inverse();
        assert!(gt.records[0].pose.rotation_angle_to(&p0) < 1e-12);
        assert!(gt.records[0].pose.translation_distance_to(&p0) < 1e-12);
        assert!((seq.frame(3).unwrap().timestamp - 0.1).abs() < 1e-12);
    }

    #[test]
    fn re_export_is_bitwise_identical() {
        let cfg = small_cfg();
        let a = tempfile::tempdir().unwrap();
        let b = tempfile::tempdir().unwrap();
        for d in [&a, &b] {
            let scene = build_scene(&cfg, 9).unwrap();
            export_sequence(&scene, &cfg.trajectory, &cfg.intrinsics, d.path()).unwrap();
        }
        assert_eq!(dir_bytes(a.path()), dir_bytes(b.path()));
    }
}
