use crate::descriptor::Descriptor;
use crate::geometry::{project, CameraIntrinsics, Pixel, Point3, Pose};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MatchParams {
    pub search_radius_px: f64,
    pub max_hamming: u32,
    /// Best distance must not exceed `ratio` times the second best.
    pub ratio: f64,
}

impl Default for MatchParams {
    fn default() -> Self {
        Self {
            search_radius_px: 15.0,
            max_hamming: 64,
            ratio: 0.8,
        }
    }
}

/// A map point paired with a query feature.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Correspondence {
    pub point_id: u64,
    /// Index into the query slice.
    pub query: usize,
    pub world: Point3<f64>,
    pub pixel: Pixel,
    pub distance: u32,
}

/// Map point as seen by the matcher.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MatchCandidate {
    pub id: u64,
    pub position: Point3<f64>,
    pub descriptor: Descriptor,
}

/// Query feature.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QueryFeature {
    pub pixel: Pixel,
    pub descriptor: Descriptor,
}

fn ratio_ok(best: u32, second: Option<u32>, p: &MatchParams) -> bool {
    if best > p.max_hamming {
        return false;
    }
    match second {
        None => true,
        // Equal distances are ambiguous whatever the ratio.
        Some(s) => best < s && best as f64 <= p.ratio * s as f64,
    }
}

/// Greedy one-to-one assignment, best descriptor distance first.
fn assign(mut proposals: Vec<Correspondence>, n_query: usize) -> Vec<Correspondence> {
    proposals.sort_by(|a, b| {
        a.distance
            .cmp(&b.distance)
            .then(a.point_id.cmp(&b.point_id))
            .then(a.query.cmp(&b.query))
    });
    let mut used = vec![false; n_query];
    let mut out = Vec::with_capacity(proposals.len());
    for c in proposals {
        if !used[c.query] {
            used[c.query] = true;
            out.push(c);
        }
    }
    out
}

/// Uniform grid over query pixels for radius searches.
struct Grid {
    cell: f64,
    cols: usize,
    rows: usize,
    buckets: Vec<Vec<usize>>,
}

impl Grid {
    fn new(query: &[QueryFeature], cell: f64, k: &CameraIntrinsics) -> Self {
        let cols = (k.width as f64 / cell).ceil().max(1.0) as usize;
        let rows = (k.height as f64 / cell).ceil().max(1.0) as usize;
        let mut buckets = vec![Vec::new(); cols * rows];
        for (i, q) in query.iter().enumerate() {
            let cx = ((q.pixel.u / cell).floor().max(0.0) as usize).min(cols - 1);
            let cy = ((q.pixel.v / cell).floor().max(0.0) as usize).min(rows - 1);
            buckets[cy * cols + cx].push(i);
        }
        Self {
            cell,
            cols,
            rows,
            buckets,
        }
    }

    fn near(&self, p: &Pixel, radius: f64, mut f: impl FnMut(usize)) {
        let lo = |v: f64| ((v - radius) / self.cell).floor().max(0.0) as usize;
        let hi = |v: f64, n: usize| (((v + radius) / self.cell).floor().max(0.0) as usize).min(n - 1);
        if p.u + radius < 0.0 || p.v + radius < 0.0 {
            return;
        }
        for cy in lo(p.v)..=hi(p.v, self.rows) {
            for cx in lo(p.u)..=hi(p.u, self.cols) {
                for &i in &self.buckets[cy * self.cols + cx] {
                    f(i);
                }
            }
        }
    }
}

/// Guided matching: each candidate is projected with `pose` and compared
/// against query features within the search radius.
pub fn match_projected(
    query: &[QueryFeature],
    candidates: &[MatchCandidate],
    pose: &Pose,
    k: &CameraIntrinsics,
    params: &MatchParams,
) -> Vec<Correspondence> {
    if query.is_empty() || candidates.is_empty() {
        return Vec::new();
    }
    let r = params.search_radius_px;
    let grid = Grid::new(query, r.max(8.0), k);
    let margin = r;
    let mut proposals = Vec::new();
    for c in candidates {
        let Ok(px) = project(&pose.transform(&c.position), k) else {
            continue;
        };
        if px.u < -margin || px.v < -margin || px.u > k.width as f64 + margin || px.v > k.height as f64 + margin {
            continue;
        }
        let mut best: Option<(u32, usize)> = None;
        let mut second: Option<u32> = None;
        grid.near(&px, r, |i| {
            if query[i].pixel.distance(&px) > r {
                return;
            }
            let d = c.descriptor.hamming(&query[i].descriptor);
            match best {
                Some((b, _)) if d >= b => {
                    if second.is_none_or(|s| d < s) {
                        second = Some(d);
                    }
                }
                _ => {
                    if let Some((b, _)) = best {
                        second = Some(b);
                    }
                    best = Some((d, i));
                }
            }
        });
        if let Some((d, i)) = best {
            if ratio_ok(d, second, params) {
                proposals.push(Correspondence {
                    point_id: c.id,
                    query: i,
                    world: c.position,
                    pixel: query[i].pixel,
                    distance: d,
                });
            }
        }
    }
    assign(proposals, query.len())
}

/// Brute-force matching without a pose prior, used for relocalisation.
pub fn match_exhaustive(
    query: &[QueryFeature],
    candidates: &[MatchCandidate],
    params: &MatchParams,
) -> Vec<Correspondence> {
    let mut proposals = Vec::new();
    for c in candidates {
        let mut best: Option<(u32, usize)> = None;
        let mut second: Option<u32> = None;
        for (i, q) in query.iter().enumerate() {
            let d = c.descriptor.hamming(&q.descriptor);
            match best {
                Some((b, _)) if d >= b => {
                    if second.is_none_or(|s| d < s) {
                        second = Some(d);
                    }
                }
                _ => {
                    if let Some((b, _)) = best {
                        second = Some(b);
                    }
                    best = Some((d, i));
                }
            }
        }
        if let Some((d, i)) = best {
            if ratio_ok(d, second, params) {
                proposals.push(Correspondence {
                    point_id: c.id,
                    query: i,
                    world: c.position,
                    pixel: query[i].pixel,
                    distance: d,
                });
            }
        }
    }
    assign(proposals, query.len())
}
