//! Deterministic text and image exports of profiles and regions.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use crate::gains::Gain;
use crate::scalar::Scalar;

use super::{GainProfile, SrgRegion};

/// Profile as CSV with an `inf` literal for unbounded outer radii.
pub fn profile_csv<T: Scalar>(profile: &GainProfile<T>) -> String {
    let mut out = String::from("alpha,zeta,gamma\n");
    for e in profile.entries() {
        match e.gamma {
            Gain::Finite(g) => {
                let _ = writeln!(out, "{},{},{}", e.alpha, e.zeta, g);
            }
            Gain::Infinite => {
                let _ = writeln!(out, "{},{},inf", e.alpha, e.zeta);
            }
        }
    }
    out
}

/// Region as CSV rows `(re, im, inside)`, scanning rows top to bottom.
pub fn region_csv<T: Scalar>(region: &SrgRegion<T>) -> String {
    let mut out = String::from("re,im,inside\n");
    for row in 0..region.height() {
        for col in 0..region.width() {
            let (re, im) = region.cell_center(row, col);
            let inside = u8::from(region.get(row, col));
            let _ = writeln!(out, "{re},{im},{inside}");
        }
    }
    out
}

/// Region as a binary portable graymap: inside cells black, outside white.
pub fn region_pgm<T: Scalar>(region: &SrgRegion<T>) -> Vec<u8> {
    let mut out = format!("P5\n{} {}\n255\n", region.width(), region.height()).into_bytes();
    out.extend(region.mask().iter().map(|&b| if b { 0u8 } else { 255u8 }));
    out
}

/// Integer key of a contour vertex in half-cell units.
type Pt = (i64, i64);

/// Contour segments of the mask by marching squares on the cell-center
/// sample grid, padded with an outside ring so every contour closes.
fn contour_segments<T: Scalar>(region: &SrgRegion<T>) -> Vec<(Pt, Pt)> {
    let h = region.height() as i64;
    let w = region.width() as i64;
    let sample = |gi: i64, gj: i64| -> bool {
        let i = gi - 1;
        let j = gj - 1;
        if i < 0 || j < 0 || i >= h || j >= w {
            false
        } else {
            region.get(i as usize, j as usize)
        }
    };
    let mut segs: Vec<(Pt, Pt)> = Vec::new();
    for ci in 0..h + 1 {
        for cj in 0..w + 1 {
            let tl = sample(ci, cj);
            let tr = sample(ci, cj + 1);
            let br = sample(ci + 1, cj + 1);
            let bl = sample(ci + 1, cj);
            let top = (2 * ci, 2 * cj + 1);
            let bottom = (2 * ci + 2, 2 * cj + 1);
            let left = (2 * ci + 1, 2 * cj);
            let right = (2 * ci + 1, 2 * cj + 2);
            match (tl, tr, br, bl) {
                (false, false, false, false) | (true, true, true, true) => {}
                (true, false, false, false) | (false, true, true, true) => {
                    segs.push((left, top));
                }
                (false, true, false, false) | (true, false, true, true) => {
                    segs.push((top, right));
                }
                (false, false, true, false) | (true, true, false, true) => {
                    segs.push((right, bottom));
                }
                (false, false, false, true) | (true, true, true, false) => {
                    segs.push((bottom, left));
                }
                (true, true, false, false) | (false, false, true, true) => {
                    segs.push((left, right));
                }
                (false, true, true, false) | (true, false, false, true) => {
                    segs.push((top, bottom));
                }
                (true, false, true, false) => {
                    segs.push((left, top));
                    segs.push((right, bottom));
                }
                (false, true, false, true) => {
                    segs.push((top, right));
                    segs.push((bottom, left));
                }
            }
        }
    }
    segs
}

/// Chains segments into closed loops; fill rule evenodd turns nested loops
/// into holes.
fn stitch_loops(segs: &[(Pt, Pt)]) -> Vec<Vec<Pt>> {
    let mut adj: BTreeMap<Pt, Vec<usize>> = BTreeMap::new();
    for (idx, (a, b)) in segs.iter().enumerate() {
        adj.entry(*a).or_default().push(idx);
        adj.entry(*b).or_default().push(idx);
    }
    let mut used = vec![false; segs.len()];
    let mut loops = Vec::new();
    for start in 0..segs.len() {
        if used[start] {
            continue;
        }
        used[start] = true;
        let (a0, b0) = segs[start];
        let mut path = vec![a0, b0];
        let mut cur = b0;
        while cur != a0 {
            let Some(cands) = adj.get(&cur) else { break };
            let Some(&next) = cands.iter().find(|&&i| !used[i]) else { break };
            used[next] = true;
            let (na, nb) = segs[next];
            cur = if na == cur { nb } else { na };
            path.push(cur);
        }
        if path.len() > 2 {
            loops.push(path);
        }
    }
    loops
}

/// Region as a standalone SVG: filled marching-squares contours, window
/// border, and real/imaginary axes. Output is deterministic.
pub fn region_svg<T: Scalar>(region: &SrgRegion<T>) -> String {
    let w = region.width() as f64;
    let h = region.height() as f64;
    let win = region.window();
    let f = |v: T| num_traits::cast::<T, f64>(v).unwrap_or(f64::NAN);
    let (re_min, re_max) = (f(win.re_min), f(win.re_max));
    let (im_min, im_max) = (f(win.im_min), f(win.im_max));
    let re_span = re_max - re_min;
    let im_span = im_max - im_min;
    let px_w = 720.0;
    let px_h = (px_w * im_span / re_span).max(1.0);
    let re_step = re_span / w;
    let im_step = im_span / h;
    let re_mid = (re_min + re_max) / 2.0;
    let im_mid = (im_min + im_max) / 2.0;

    // Half-cell grid coordinates back to the plane, then to pixels.
    let to_px = |p: Pt| -> (f64, f64) {
        let (pr, pc) = p;
        let re = re_mid + re_step * ((pc as f64 - 1.0 - w) / 2.0);
        let im = im_mid + im_step * ((h + 1.0 - pr as f64) / 2.0);
        ((re - re_min) / re_span * px_w, (im_max - im) / im_span * px_h)
    };
    let x_of = |re: f64| (re - re_min) / re_span * px_w;
    let y_of = |im: f64| (im_max - im) / im_span * px_h;

    let mut svg = String::new();
    let _ = writeln!(
        svg,
        "<svg xmlns=\"http://www.w3.org/2000/svg\" viewBox=\"0 0 {px_w:.2} {px_h:.2}\" \
         width=\"{px_w:.2}\" height=\"{px_h:.2}\">"
    );
    let _ = writeln!(
        svg,
        "<rect x=\"0\" y=\"0\" width=\"{px_w:.2}\" height=\"{px_h:.2}\" \
         fill=\"#ffffff\" stroke=\"#404040\" stroke-width=\"1\"/>"
    );

    let segs = contour_segments(region);
    let loops = stitch_loops(&segs);
    if !loops.is_empty() {
        let mut d = String::new();
        for path in &loops {
            for (idx, &p) in path.iter().enumerate() {
                let (x, y) = to_px(p);
                let cmd = if idx == 0 { 'M' } else { 'L' };
                let _ = write!(d, "{cmd}{x:.3} {y:.3} ");
            }
            let _ = write!(d, "Z ");
        }
        let _ = writeln!(
            svg,
            "<path d=\"{}\" fill=\"#9e9e9e\" fill-rule=\"evenodd\" \
             stroke=\"#303030\" stroke-width=\"1\"/>",
            d.trim_end()
        );
    }

    if re_min < 0.0 && re_max > 0.0 {
        let x = x_of(0.0);
        let _ = writeln!(
            svg,
            "<line x1=\"{x:.3}\" y1=\"0\" x2=\"{x:.3}\" y2=\"{px_h:.2}\" \
             stroke=\"#000000\" stroke-width=\"0.8\"/>"
        );
    }
    if im_min < 0.0 && im_max > 0.0 {
        let y = y_of(0.0);
        let _ = writeln!(
            svg,
            "<line x1=\"0\" y1=\"{y:.3}\" x2=\"{px_w:.2}\" y2=\"{y:.3}\" \
             stroke=\"#000000\" stroke-width=\"0.8\"/>"
        );
    }
    let _ = writeln!(
        svg,
        "<text x=\"4\" y=\"{:.2}\" font-size=\"11\" fill=\"#202020\">{re_min} .. {re_max} / \
         {im_min}i .. {im_max}i</text>",
        px_h - 6.0
    );
    if region.includes_infinity() {
        let _ = writeln!(
            svg,
            "<text x=\"4\" y=\"14\" font-size=\"12\" fill=\"#202020\">region includes the \
             point at infinity</text>"
        );
    }
    svg.push_str("</svg>\n");
    svg
}
