//! Dense block-matching optical flow and the accelerometer-gated motion
//! component.

use std::fmt::Write as _;

use crate::ingest::{AccelSeries, GrayImage};
use crate::util::{median, min_max};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FlowConfig {
    /// Side of the square, non-overlapping matching blocks (px).
    pub block_size: usize,
    /// Search radius at every pyramid level, in that level's pixels.
    pub search_radius: usize,
    /// Number of pyramid levels; 1 is single-scale matching.
    pub levels: usize,
}

impl Default for FlowConfig {
    fn default() -> Self {
        Self {
            block_size: 16,
            search_radius: 7,
            levels: 3,
        }
    }
}

impl FlowConfig {
    pub fn validate(&self) -> Result<()> {
        if self.block_size < 4 {
            return Err(Error::invalid("flow block_size must be >= 4"));
        }
        if self.levels < 1 || self.levels > 8 {
            return Err(Error::invalid("flow levels must be in 1..=8"));
        }
        if self.search_radius < 1 {
            return Err(Error::invalid("flow search_radius must be >= 1"));
        }
        Ok(())
    }

    /// Largest displacement (per component) the matcher can return:
    /// `search_radius * 2^(levels-1)`. Also used as `|v_max|` when
    /// normalizing motion activity.
    pub fn max_displacement(&self) -> usize {
        self.search_radius << (self.levels - 1)
    }
}

/// Motion vectors at block centers, row-major over the block grid.
#[derive(Debug, Clone, PartialEq)]
pub struct FlowField {
    cols: usize,
    rows: usize,
    block_size: usize,
    vectors: Vec<[f64; 2]>,
}

impl FlowField {
    pub fn new(
        cols: usize,
        rows: usize,
        block_size: usize,
        vectors: Vec<[f64; 2]>,
    ) -> Result<Self> {
        if cols * rows != vectors.len() {
            return Err(Error::invalid(format!(
                "flow grid {cols}x{rows} does not match {} vectors",
                vectors.len()
            )));
        }
        if block_size == 0 {
            return Err(Error::invalid("block size must be positive"));
        }
        Ok(Self {
            cols,
            rows,
            block_size,
            vectors,
        })
    }

    /// Build a field by evaluating `f(center_x, center_y)` at every block center.
    pub fn from_fn(
        cols: usize,
        rows: usize,
        block_size: usize,
        f: impl Fn(f64, f64) -> [f64; 2],
    ) -> Self {
        let mut vectors = Vec::with_capacity(cols * rows);
        for by in 0..rows {
            for bx in 0..cols {
                let (cx, cy) = block_center(bx, by, block_size);
                vectors.push(f(cx, cy));
            }
        }
        Self {
            cols,
            rows,
            block_size,
            vectors,
        }
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn block_size(&self) -> usize {
        self.block_size
    }

    pub fn len(&self) -> usize {
        self.vectors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vectors.is_empty()
    }

    pub fn vectors(&self) -> &[[f64; 2]] {
        &self.vectors
    }

    pub fn get(&self, bx: usize, by: usize) -> [f64; 2] {
        self.vectors[by * self.cols + bx]
    }

    pub fn center(&self, bx: usize, by: usize) -> (f64, f64) {
        block_center(bx, by, self.block_size)
    }

    pub fn map(&self, f: impl Fn([f64; 2]) -> [f64; 2]) -> FlowField {
        FlowField {
            vectors: self.vectors.iter().map(|&v| f(v)).collect(),
            ..*self
        }
    }

    /// `bx,by,vx,vy` dump, one row per block.
    pub fn to_csv(&self) -> String {
        let mut s = String::from("bx,by,vx,vy\n");
        for by in 0..self.rows {
            for bx in 0..self.cols {
                let v = self.get(bx, by);
                let _ = writeln!(s, "{bx},{by},{},{}", v[0], v[1]);
            }
        }
        s
    }
}

fn block_center(bx: usize, by: usize, block_size: usize) -> (f64, f64) {
    let half = block_size as f64 / 2.0;
    (
        (bx * block_size) as f64 + half,
        (by * block_size) as f64 + half,
    )
}

fn row_sad(ra: &[u8], rb: &[u8]) -> u32 {
    let mut total = 0u32;
    let mut ca = ra.chunks_exact(16);
    let mut cb = rb.chunks_exact(16);
    for (x, y) in (&mut ca).zip(&mut cb) {
        let x: &[u8; 16] = x.try_into().unwrap();
        let y: &[u8; 16] = y.try_into().unwrap();
        let mut acc = 0u16;
        for i in 0..16 {
            acc += x[i].abs_diff(y[i]) as u16;
        }
        total += acc as u32;
    }
    let (ra, rb) = (ca.remainder(), cb.remainder());
    let mut ca = ra.chunks_exact(8);
    let mut cb = rb.chunks_exact(8);
    for (x, y) in (&mut ca).zip(&mut cb) {
        let x: &[u8; 8] = x.try_into().unwrap();
        let y: &[u8; 8] = y.try_into().unwrap();
        let mut acc = 0u16;
        for i in 0..8 {
            acc += x[i].abs_diff(y[i]) as u16;
        }
        total += acc as u32;
    }
    for (&p, &q) in ca.remainder().iter().zip(cb.remainder()) {
        total += p.abs_diff(q) as u32;
    }
    total
}

/// Sum of absolute differences between the `size`×`size` block of `a` at
/// `(ax, ay)` and the block of `b` at `(ax+dx, ay+dy)`; `b` is sampled with
/// edge clamping. Stops early once `limit` is exceeded.
fn block_sad(
    a: &GrayImage,
    b: &GrayImage,
    ax: usize,
    ay: usize,
    size: (usize, usize),
    dx: i64,
    dy: i64,
    limit: u32,
) -> u32 {
    let (sw, sh) = size;
    let bx0 = ax as i64 + dx;
    let by0 = ay as i64 + dy;
    let inside =
        bx0 >= 0 && by0 >= 0 && bx0 as usize + sw <= b.width() && by0 as usize + sh <= b.height();
    let mut total = 0u32;
    if inside {
        let (bx0, by0) = (bx0 as usize, by0 as usize);
        for row in 0..sh {
            let ra = &a.row(ay + row)[ax..ax + sw];
            let rb = &b.row(by0 + row)[bx0..bx0 + sw];
            total += row_sad(ra, rb);
            if total > limit {
                return total;
            }
        }
    } else {
        let maxx = b.width() as i64 - 1;
        let maxy = b.height() as i64 - 1;
        for row in 0..sh {
            let ra = &a.row(ay + row)[ax..ax + sw];
            let yb = (by0 + row as i64).clamp(0, maxy) as usize;
            let rb = b.row(yb);
            for (col, &p) in ra.iter().enumerate() {
                let xb = (bx0 + col as i64).clamp(0, maxx) as usize;
                total += (p as i32 - rb[xb] as i32).unsigned_abs();
            }
            if total > limit {
                return total;
            }
        }
    }
    total
}

/// Smallest matching support at coarse pyramid levels (px).
const MIN_SUPPORT: usize = 8;

/// Candidate ordering: lower cost, then smaller squared magnitude, then
/// lexicographic (dx, dy).
fn better(cand: (u32, i64, i64), best: (u32, i64, i64)) -> bool {
    let key = |(c, dx, dy): (u32, i64, i64)| (c, dx * dx + dy * dy, dx, dy);
    key(cand) < key(best)
}

/// Coarse-to-fine block matching from `frame_a` to `frame_b`.
///
/// One vector per non-overlapping `block_size` block of `frame_a`
/// (`floor(W/bs) x floor(H/bs)` grid). At the coarsest level the search
/// covers ±`search_radius` around zero; each finer level doubles the previous
/// estimate and searches ±`search_radius` around it (plus the zero vector).
/// On downsampled levels the matched patch is the block footprint, widened to
/// at least 8 px around the block center. Displacements are confined to
/// ±[`FlowConfig::max_displacement`] at full resolution.
pub fn estimate_flow(
    frame_a: &GrayImage,
    frame_b: &GrayImage,
    cfg: &FlowConfig,
) -> Result<FlowField> {
    cfg.validate()?;
    if frame_a.dims() != frame_b.dims() {
        return Err(Error::DimensionMismatch {
            expected: frame_a.dims(),
            found: frame_b.dims(),
        });
    }
    let (w, h) = frame_a.dims();
    let bs = cfg.block_size;
    if w < bs || h < bs {
        return Err(Error::invalid(format!(
            "frame {w}x{h} is smaller than one {bs}px block"
        )));
    }
    let cols = w / bs;
    let rows = h / bs;

    let mut pyr_a = vec![frame_a.clone()];
    let mut pyr_b = vec![frame_b.clone()];
    for l in 1..cfg.levels {
        let na = pyr_a[l - 1].downsample2();
        let nb = pyr_b[l - 1].downsample2();
        pyr_a.push(na);
        pyr_b.push(nb);
    }

    let radius = cfg.search_radius as i64;
    let bound = cfg.max_displacement() as i64;
    let mut vectors = Vec::with_capacity(cols * rows);
    for by in 0..rows {
        for bx in 0..cols {
            let mut pred = (0i64, 0i64);
            for level in (0..cfg.levels).rev() {
                let a = &pyr_a[level];
                let b = &pyr_b[level];
                if level + 1 < cfg.levels {
                    pred = (pred.0 * 2, pred.1 * 2);
                }
                // coarse levels keep at least MIN_SUPPORT px of context
                // around the block center
                let (lw, lh) = a.dims();
                let sw = (bs >> level).max(MIN_SUPPORT).min(lw);
                let sh = (bs >> level).max(MIN_SUPPORT).min(lh);
                let cx = (bx * bs + bs / 2) >> level;
                let cy = (by * bs + bs / 2) >> level;
                let ax = cx.saturating_sub(sw / 2).min(lw - sw);
                let ay = cy.saturating_sub(sh / 2).min(lh - sh);
                let lim = bound >> level;
                let xs = (pred.0 - radius).max(-lim)..=(pred.0 + radius).min(lim);
                let ys = (pred.1 - radius).max(-lim)..=(pred.1 + radius).min(lim);

                let mut best = (
                    block_sad(a, b, ax, ay, (sw, sh), pred.0, pred.1, u32::MAX),
                    pred.0,
                    pred.1,
                );
                let zero = (0i64, 0i64);
                let candidates = ys
                    .flat_map(|dy| xs.clone().map(move |dx| (dx, dy)))
                    .chain(std::iter::once(zero));
                for (dx, dy) in candidates {
                    if (dx, dy) == (best.1, best.2) {
                        continue;
                    }
                    // equal costs must be evaluated in full for the tie-break
                    let cost = block_sad(a, b, ax, ay, (sw, sh), dx, dy, best.0);
                    if better((cost, dx, dy), best) {
                        best = (cost, dx, dy);
                    }
                }
                pred = (best.1, best.2);
            }
            vectors.push([pred.0 as f64, pred.1 as f64]);
        }
    }
    FlowField::new(cols, rows, bs, vectors)
}

/// Mean vector magnitude normalized by `v_max_mag`, clipped to 1.
pub fn motion_activity(flow: &FlowField, v_max_mag: f64) -> Result<f64> {
    if !(v_max_mag > 0.0) {
        return Err(Error::invalid("v_max_mag must be positive"));
    }
    if flow.is_empty() {
        return Ok(0.0);
    }
    let total: f64 = flow
        .vectors()
        .iter()
        .map(|v| (v[0] * v[0] + v[1] * v[1]).sqrt())
        .sum();
    Ok((total / (flow.len() as f64 * v_max_mag)).min(1.0))
}

/// Per-frame device-motion gate in [0,1].
///
/// Deviation of the acceleration norm from its median, Gaussian-smoothed over
/// time (std `sigma_s`, kernel truncated at 3σ and renormalized at the edges),
/// then min–max normalized. A constant deviation maps to all zeros.
pub fn artifact_gate(accel: &AccelSeries, sigma_s: f64) -> Result<Vec<f64>> {
    if accel.len() < 2 {
        return Err(Error::InsufficientData(
            "artifact gate needs at least 2 accelerometer samples".into(),
        ));
    }
    if !(sigma_s > 0.0) {
        return Err(Error::invalid("gate sigma must be positive"));
    }
    let mags = accel.magnitudes();
    let baseline = median(&mags);
    let dev: Vec<f64> = mags.iter().map(|m| (m - baseline).abs()).collect();
    let ts = &accel.timestamps;
    let reach = 3.0 * sigma_s;
    let inv2s2 = 1.0 / (2.0 * sigma_s * sigma_s);

    let mut smoothed = Vec::with_capacity(dev.len());
    let mut lo = 0usize;
    for i in 0..dev.len() {
        while ts[i] - ts[lo] > reach {
            lo += 1;
        }
        let mut num = 0.0;
        let mut den = 0.0;
        for j in lo..dev.len() {
            let d = ts[j] - ts[i];
            if d > reach {
                break;
            }
            let w = (-d * d * inv2s2).exp();
            num += w * dev[j];
            den += w;
        }
        smoothed.push(num / den);
    }

    let (min, max) = min_max(&smoothed);
    let span = max - min;
    if !(span > 1e-12 * max.abs().max(1.0)) {
        return Ok(vec![0.0; smoothed.len()]);
    }
    Ok(smoothed
        .into_iter()
        .map(|x| ((x - min) / span).clamp(0.0, 1.0))
        .collect())
}

/// `m = (1 - g) * m_bar`.
pub fn motion_component(m_bar: f64, g: f64) -> Result<f64> {
    if !(0.0..=1.0).contains(&m_bar) {
        return Err(Error::invalid(format!("m_bar {m_bar} outside [0,1]")));
    }
    if !(0.0..=1.0).contains(&g) {
        return Err(Error::invalid(format!("gate {g} outside [0,1]")));
    }
    Ok((1.0 - g) * m_bar)
}
