//! Approach/withdrawal motivation from local affine flow models.
//!
//! Inside the attended region the flow field is fitted, window by window, by
//! `e_p = e_p0 + χ (p - p0)`. The 2×2 matrix χ splits into divergence `d1`,
//! curl `d2` and the two hyperbolic terms `h1`, `h2`:
//!
//! ```text
//! χ = ½ (d1·[1 0; 0 1] + d2·[0 -1; 1 0] + h1·[1 0; 0 -1] + h2·[0 1; 1 0])
//! ```
//!
//! Positive divergence (zooming in) relative to the other terms signals
//! approach. Each window contributes `ρ = d1 / (|d2| + |h1| + |h2| + ε)` and
//! the motivation is carried in log form, `log_o = Σ ρ`.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::flow::FlowField;
use crate::saliency::AttentiveRegion;
use crate::{Error, Result};

/// The 2×2 affine matrix laid out as `[[χ1, χ3], [χ2, χ4]]`.
pub type Chi = [[f64; 2]; 2];

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Decomposition {
    pub d1: f64,
    pub d2: f64,
    pub h1: f64,
    pub h2: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct FlowParams {
    pub u1: f64,
    pub u2: f64,
    pub d1: f64,
    pub d2: f64,
    pub h1: f64,
    pub h2: f64,
    /// RMS reconstruction error of the fit over the window (px/frame).
    pub residual: f64,
}

impl FlowParams {
    pub fn decomposition(&self) -> Decomposition {
        Decomposition {
            d1: self.d1,
            d2: self.d2,
            h1: self.h1,
            h2: self.h2,
        }
    }
}

pub fn decompose(chi: Chi) -> Decomposition {
    let (c1, c3) = (chi[0][0], chi[0][1]);
    let (c2, c4) = (chi[1][0], chi[1][1]);
    Decomposition {
        d1: c1 + c4,
        d2: c2 - c3,
        h1: c1 - c4,
        h2: c2 + c3,
    }
}

/// Inverse of [`decompose`].
pub fn reconstruct(d: Decomposition) -> Chi {
    [
        [0.5 * (d.d1 + d.h1), 0.5 * (d.h2 - d.d2)],
        [0.5 * (d.d2 + d.h2), 0.5 * (d.d1 - d.h1)],
    ]
}

/// Rectangle of blocks in a flow grid.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct BlockWindow {
    pub x0: usize,
    pub y0: usize,
    pub cols: usize,
    pub rows: usize,
}

impl BlockWindow {
    fn blocks(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        (self.y0..self.y0 + self.rows)
            .flat_map(move |y| (self.x0..self.x0 + self.cols).map(move |x| (x, y)))
    }
}

/// Least-squares affine fit of the flow over `window`, with `p0` the centroid
/// of the window's block centers.
pub fn fit_affine_flow(flow: &FlowField, window: BlockWindow) -> Result<FlowParams> {
    if window.cols == 0
        || window.rows == 0
        || window.x0 + window.cols > flow.cols()
        || window.y0 + window.rows > flow.rows()
    {
        return Err(Error::invalid(format!(
            "window {window:?} outside the {}x{} flow grid",
            flow.cols(),
            flow.rows()
        )));
    }
    let n = (window.cols * window.rows) as f64;
    let (mut cx, mut cy, mut mvx, mut mvy) = (0.0, 0.0, 0.0, 0.0);
    for (bx, by) in window.blocks() {
        let (x, y) = flow.center(bx, by);
        let v = flow.get(bx, by);
        cx += x;
        cy += y;
        mvx += v[0];
        mvy += v[1];
    }
    cx /= n;
    cy /= n;
    mvx /= n;
    mvy /= n;

    let (mut sxx, mut syy, mut sxy) = (0.0, 0.0, 0.0);
    let (mut sxu, mut syu, mut sxv, mut syv) = (0.0, 0.0, 0.0, 0.0);
    for (bx, by) in window.blocks() {
        let (x, y) = flow.center(bx, by);
        let (dx, dy) = (x - cx, y - cy);
        let v = flow.get(bx, by);
        let (du, dv) = (v[0] - mvx, v[1] - mvy);
        sxx += dx * dx;
        syy += dy * dy;
        sxy += dx * dy;
        sxu += dx * du;
        syu += dy * du;
        sxv += dx * dv;
        syv += dy * dv;
    }
    let det = sxx * syy - sxy * sxy;
    if n < 3.0 || !(det > 1e-12 * (sxx * syy).max(f64::MIN_POSITIVE)) {
        return Err(Error::SingularFit(format!(
            "block centers of window {window:?} are collinear"
        )));
    }
    // [a b] = [[sxx sxy],[sxy syy]]^-1 [s_x s_y]
    let solve = |sx: f64, sy: f64| ((syy * sx - sxy * sy) / det, (sxx * sy - sxy * sx) / det);
    let (c1, c3) = solve(sxu, syu);
    let (c2, c4) = solve(sxv, syv);

    let mut sq = 0.0;
    for (bx, by) in window.blocks() {
        let (x, y) = flow.center(bx, by);
        let (dx, dy) = (x - cx, y - cy);
        let v = flow.get(bx, by);
        let ex = mvx + c1 * dx + c3 * dy - v[0];
        let ey = mvy + c2 * dx + c4 * dy - v[1];
        sq += ex * ex + ey * ey;
    }
    let d = decompose([[c1, c3], [c2, c4]]);
    Ok(FlowParams {
        u1: mvx,
        u2: mvy,
        d1: d.d1,
        d2: d.d2,
        h1: d.h1,
        h2: d.h2,
        residual: (sq / n).sqrt(),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MotivationConfig {
    /// Side of the square fitting window, in blocks.
    pub window: usize,
    /// Step between fitting windows, in blocks.
    pub stride: usize,
    pub epsilon: f64,
    /// Per-window ratio clamp κ (ρ ∈ [-κ, κ]).
    pub kappa: f64,
    pub clamp: bool,
    /// Use `d2 + h1 + h2` instead of `|d2| + |h1| + |h2|` in the ratio.
    pub signed_denominator: bool,
}

impl Default for MotivationConfig {
    fn default() -> Self {
        Self {
            window: 3,
            stride: 1,
            epsilon: 1e-6,
            kappa: 10.0,
            clamp: true,
            signed_denominator: false,
        }
    }
}

impl MotivationConfig {
    pub fn validate(&self) -> Result<()> {
        if self.window < 2 {
            return Err(Error::invalid(
                "motivation window must be at least 2 blocks",
            ));
        }
        if self.stride < 1 {
            return Err(Error::invalid("motivation stride must be at least 1"));
        }
        if !(self.epsilon >= 0.0) || !(self.kappa > 0.0) {
            return Err(Error::invalid(
                "motivation epsilon must be >= 0 and kappa > 0",
            ));
        }
        Ok(())
    }

    pub fn ratio(&self, d: &Decomposition) -> f64 {
        let den = if self.signed_denominator {
            d.d2 + d.h1 + d.h2 + self.epsilon
        } else {
            d.d2.abs() + d.h1.abs() + d.h2.abs() + self.epsilon
        };
        let rho = d.d1 / den;
        if self.clamp {
            rho.clamp(-self.kappa, self.kappa)
        } else {
            rho
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct WindowFit {
    pub window: BlockWindow,
    pub params: FlowParams,
    pub rho: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MotivationResult {
    /// Natural log of the motivation component.
    pub log_o: f64,
    /// Per-window fits in the fixed summation order (row-major).
    pub windows: Vec<WindowFit>,
    pub region: AttentiveRegion,
    /// Blocks covered by the region.
    pub blocks: BlockWindow,
}

/// Blocks of `flow` whose centers fall inside the region's bounding box; if
/// none do, the block under the box center.
pub fn region_blocks(flow: &FlowField, region: &AttentiveRegion) -> BlockWindow {
    let bs = flow.block_size() as f64;
    let half = bs / 2.0;
    let b = region.bbox;
    let first = |lo: usize| ((lo as f64 - half) / bs).ceil().max(0.0) as usize;
    let last = |hi: usize, n: usize| {
        let v = ((hi as f64 - half) / bs).floor();
        if v < 0.0 {
            None
        } else {
            Some((v as usize).min(n - 1))
        }
    };
    let xs = (first(b.x0), last(b.x1, flow.cols()));
    let ys = (first(b.y0), last(b.y1, flow.rows()));
    match (xs, ys) {
        ((x0, Some(x1)), (y0, Some(y1))) if x0 <= x1 && y0 <= y1 => BlockWindow {
            x0,
            y0,
            cols: x1 - x0 + 1,
            rows: y1 - y0 + 1,
        },
        _ => {
            let cx = (b.x0 + b.x1) as f64 / 2.0;
            let cy = (b.y0 + b.y1) as f64 / 2.0;
            BlockWindow {
                x0: ((cx / bs) as usize).min(flow.cols() - 1),
                y0: ((cy / bs) as usize).min(flow.rows() - 1),
                cols: 1,
                rows: 1,
            }
        }
    }
}

/// Grow `w` to at least `size`×`size` around its center, staying inside the grid.
fn grow_window(w: BlockWindow, size: usize, cols: usize, rows: usize) -> BlockWindow {
    let grow = |start: usize, len: usize, n: usize| {
        let target = size.min(n).max(len);
        let extra = target - len;
        let s = start.saturating_sub(extra / 2);
        let s = s.min(n - target);
        (s, target)
    };
    let (x0, c) = grow(w.x0, w.cols, cols);
    let (y0, r) = grow(w.y0, w.rows, rows);
    BlockWindow {
        x0,
        y0,
        cols: c,
        rows: r,
    }
}

pub fn motivation_component(
    flow: &FlowField,
    region: &AttentiveRegion,
    cfg: &MotivationConfig,
) -> Result<MotivationResult> {
    cfg.validate()?;
    if flow.is_empty() {
        return Err(Error::InsufficientData("empty flow field".into()));
    }
    let blocks = region_blocks(flow, region);
    let w = cfg.window;
    let mut fits = Vec::new();
    if blocks.cols >= w && blocks.rows >= w {
        let mut y = blocks.y0;
        while y + w <= blocks.y0 + blocks.rows {
            let mut x = blocks.x0;
            while x + w <= blocks.x0 + blocks.cols {
                let window = BlockWindow {
                    x0: x,
                    y0: y,
                    cols: w,
                    rows: w,
                };
                let params = fit_affine_flow(flow, window)?;
                fits.push(WindowFit {
                    window,
                    rho: cfg.ratio(&params.decomposition()),
                    params,
                });
                x += cfg.stride;
            }
            y += cfg.stride;
        }
    } else {
        // region smaller than one window: one fit over the whole region,
        // widened only if the region alone cannot support an affine fit
        let params = match fit_affine_flow(flow, blocks) {
            Ok(p) => Ok((blocks, p)),
            Err(Error::SingularFit(_)) => {
                let grown = grow_window(blocks, w, flow.cols(), flow.rows());
                fit_affine_flow(flow, grown).map(|p| (grown, p))
            }
            Err(e) => Err(e),
        };
        let (window, params) = params?;
        fits.push(WindowFit {
            window,
            rho: cfg.ratio(&params.decomposition()),
            params,
        });
    }
    let log_o = fits.iter().map(|f| f.rho).sum();
    Ok(MotivationResult {
        log_o,
        windows: fits,
        region: region.clone(),
        blocks,
    })
}

/// Rows of the per-frame debug CSV
/// (`frame,window_x,window_y,u1,u2,d1,d2,h1,h2,rho`), without header.
pub fn debug_rows(frame: usize, result: &MotivationResult, out: &mut String) {
    for f in &result.windows {
        let p = &f.params;
        let _ = writeln!(
            out,
            "{frame},{},{},{},{},{},{},{},{},{}",
            f.window.x0, f.window.y0, p.u1, p.u2, p.d1, p.d2, p.h1, p.h2, f.rho
        );
    }
}

pub const DEBUG_CSV_HEADER: &str = "frame,window_x,window_y,u1,u2,d1,d2,h1,h2,rho\n";

#[cfg(test)]
mod tests {
    use super::*;
    use crate::saliency::{attentive_region, BinaryMask};

    fn affine_field(cols: usize, rows: usize, u: [f64; 2], chi: Chi) -> FlowField {
        let bs = 16;
        // p0 is the grid centroid, matching the fit's reference point
        let cx = cols as f64 * bs as f64 / 2.0;
        let cy = rows as f64 * bs as f64 / 2.0;
        FlowField::from_fn(cols, rows, bs, |x, y| {
            let (dx, dy) = (x - cx, y - cy);
            [
                u[0] + chi[0][0] * dx + chi[0][1] * dy,
                u[1] + chi[1][0] * dx + chi[1][1] * dy,
            ]
        })
    }

    fn whole(flow: &FlowField) -> BlockWindow {
        BlockWindow {
            x0: 0,
            y0: 0,
            cols: flow.cols(),
            rows: flow.rows(),
        }
    }

    fn full_region(w: usize, h: usize) -> AttentiveRegion {
        attentive_region(&BinaryMask::from_fn(w, h, |_, _| true))
    }

    #[test]
    fn decompose_basis_cases() {
        let c = 0.3;
        assert_eq!(
            decompose([[c, 0.0], [0.0, c]]),
            Decomposition {
                d1: 2.0 * c,
                d2: 0.0,
                h1: 0.0,
                h2: 0.0
            }
        );
        assert_eq!(
            decompose([[0.0, -c], [c, 0.0]]),
            Decomposition {
                d1: 0.0,
                d2: 2.0 * c,
                h1: 0.0,
                h2: 0.0
            }
        );
        assert_eq!(
            decompose([[c, 0.0], [0.0, -c]]),
            Decomposition {
                d1: 0.0,
                d2: 0.0,
                h1: 2.0 * c,
                h2: 0.0
            }
        );
        assert_eq!(
            decompose([[0.0, c], [c, 0.0]]),
            Decomposition {
                d1: 0.0,
                d2: 0.0,
                h1: 0.0,
                h2: 2.0 * c
            }
        );
    }

    #[test]
    fn fit_recovers_divergence() {
        let f = affine_field(5, 5, [1.0, 2.0], [[0.1, 0.0], [0.0, 0.1]]);
        let p = fit_affine_flow(&f, whole(&f)).unwrap();
        assert!((p.u1 - 1.0).abs() < 1e-9 && (p.u2 - 2.0).abs() < 1e-9);
        assert!((p.d1 - 0.2).abs() < 1e-9);
        assert!(p.d2.abs() < 1e-9 && p.h1.abs() < 1e-9 && p.h2.abs() < 1e-9);
        assert!(p.residual < 1e-9);
    }

    #[test]
    fn fit_recovers_rotation() {
        let c = 0.05;
        let f = affine_field(4, 3, [0.0, 0.0], [[0.0, -c], [c, 0.0]]);
        let p = fit_affine_flow(&f, whole(&f)).unwrap();
        assert!((p.d2 - 0.1).abs() < 1e-9);
        assert!(p.d1.abs() < 1e-9 && p.h1.abs() < 1e-9 && p.h2.abs() < 1e-9);
    }

    #[test]
    fn zero_field_fits_zero() {
        let f = FlowField::new(3, 3, 16, vec![[0.0, 0.0]; 9]).unwrap();
        let p = fit_affine_flow(&f, whole(&f)).unwrap();
        assert_eq!([p.u1, p.u2, p.d1, p.d2, p.h1, p.h2], [0.0; 6]);
    }

    #[test]
    fn collinear_window_is_singular() {
        let f = FlowField::new(5, 1, 16, vec![[0.0, 0.0]; 5]).unwrap();
        assert!(matches!(
            fit_affine_flow(&f, whole(&f)),
            Err(Error::SingularFit(_))
        ));
    }

    #[test]
    fn zero_flow_has_unit_motivation() {
        let f = FlowField::new(6, 5, 16, vec![[0.0, 0.0]; 30]).unwrap();
        let r =
            motivation_component(&f, &full_region(96, 80), &MotivationConfig::default()).unwrap();
        assert_eq!(r.log_o, 0.0);
        assert_eq!(r.windows.len(), 4 * 3);
    }

    #[test]
    fn four_windows_ratio_sum() {
        // d1 = 0.1, h1 = 0.2
        let f = affine_field(4, 4, [0.0, 0.0], [[0.15, 0.0], [0.0, -0.05]]);
        let r =
            motivation_component(&f, &full_region(64, 64), &MotivationConfig::default()).unwrap();
        assert_eq!(r.windows.len(), 4);
        let expected = 4.0 * (0.1 / 0.200001);
        assert!((r.log_o - expected).abs() < 1e-9, "{}", r.log_o);
    }

    #[test]
    fn convergence_is_negative() {
        let f = affine_field(5, 5, [0.0, 0.0], [[-0.05, 0.01], [0.0, -0.05]]);
        let r =
            motivation_component(&f, &full_region(80, 80), &MotivationConfig::default()).unwrap();
        assert!(r.log_o < 0.0);
    }

    #[test]
    fn clamp_bounds_each_window() {
        let f = affine_field(3, 3, [0.0, 0.0], [[0.2, 0.0], [0.0, 0.2]]);
        let r =
            motivation_component(&f, &full_region(48, 48), &MotivationConfig::default()).unwrap();
        assert_eq!(r.log_o, 10.0);
        let cfg = MotivationConfig {
            clamp: false,
            ..Default::default()
        };
        let r = motivation_component(&f, &full_region(48, 48), &cfg).unwrap();
        assert!(r.log_o > 1e4);
    }

    #[test]
    fn small_region_uses_single_fit() {
        let f = affine_field(6, 6, [0.0, 0.0], [[0.1, 0.0], [0.0, 0.1]]);
        // box covering 2x2 block centers
        let mask = BinaryMask::from_fn(96, 96, |x, y| {
            (20..45).contains(&x) && (20..45).contains(&y)
        });
        let region = attentive_region(&mask);
        let r = motivation_component(&f, &region, &MotivationConfig::default()).unwrap();
        assert_eq!(r.windows.len(), 1);
        assert_eq!(
            r.windows[0].window,
            BlockWindow {
                x0: 1,
                y0: 1,
                cols: 2,
                rows: 2
            }
        );
        assert!((r.windows[0].params.d1 - 0.2).abs() < 1e-9);
        // a single block grows to a full window
        let mask = BinaryMask::from_fn(96, 96, |x, y| x == 40 && y == 40);
        let r = motivation_component(&f, &attentive_region(&mask), &MotivationConfig::default())
            .unwrap();
        assert_eq!(r.windows[0].window.cols, 3);
        assert_eq!(r.windows[0].window.rows, 3);
    }

    #[test]
    fn debug_csv_rows() {
        let f = FlowField::new(3, 3, 16, vec![[0.0, 0.0]; 9]).unwrap();
        let r =
            motivation_component(&f, &full_region(48, 48), &MotivationConfig::default()).unwrap();
        let mut s = String::new();
        debug_rows(7, &r, &mut s);
        assert_eq!(s, "7,0,0,0,0,0,0,0,0,0\n");
    }
}
