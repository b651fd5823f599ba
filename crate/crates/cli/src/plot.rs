//! Standalone SVG figures: the output path with the safe-set boundary, and the
//! certificate channels over time.

use std::fmt::Write;

use drdcbf_core::scenario::CertificateSpec;
use drdcbf_core::sim::Trajectory;

const W: f64 = 640.0;
const H: f64 = 420.0;
const MARGIN: f64 = 56.0;
const MAX_POINTS: usize = 2000;
const BLUE: &str = "#1f77b4";
const ORANGE: &str = "#ff7f0e";
const GREEN: &str = "#2ca02c";
const GREY: &str = "#444444";

/// Safe-set boundary on the first two output coordinates.
#[derive(Debug, Clone, PartialEq)]
pub enum Boundary {
    /// Closed curve (ellipse or circle).
    Loop(Vec<[f64; 2]>),
    /// `y[axis] = limit`.
    Line { axis: usize, limit: f64 },
}

impl Boundary {
    pub fn from_spec(spec: &CertificateSpec) -> Option<Self> {
        let circle = |c: &[f64], rx: f64, ry: f64| {
            Boundary::Loop(
                (0..=128)
                    .map(|i| {
                        let a = i as f64 / 128.0 * std::f64::consts::TAU;
                        [c[0] + rx * a.cos(), c[1] + ry * a.sin()]
                    })
                    .collect(),
            )
        };
        match spec {
            CertificateSpec::Ellipse { center, p } if center.len() >= 2 => {
                Some(circle(center, 1.0 / p[0].sqrt(), 1.0 / p[1].sqrt()))
            }
            CertificateSpec::Obstacle { center, radius }
            | CertificateSpec::ObstacleHocbf { center, radius, .. }
            | CertificateSpec::ObstacleBackstep { center, radius, .. }
                if center.len() >= 2 =>
            {
                Some(circle(center, *radius, *radius))
            }
            CertificateSpec::GeofenceHocbf { axis, limit, .. } if *axis < 2 => {
                Some(Boundary::Line { axis: *axis, limit: *limit })
            }
            _ => None,
        }
    }
}

struct Frame {
    x0: f64,
    x1: f64,
    y0: f64,
    y1: f64,
}

impl Frame {
    fn fit(xs: impl Iterator<Item = f64> + Clone, ys: impl Iterator<Item = f64> + Clone, equal: bool) -> Self {
        let range = |it: &mut dyn Iterator<Item = f64>| {
            it.filter(|v| v.is_finite()).fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), v| (lo.min(v), hi.max(v)))
        };
        let (mut x0, mut x1) = range(&mut xs.clone());
        let (mut y0, mut y1) = range(&mut ys.clone());
        if !x0.is_finite() {
            (x0, x1) = (0.0, 1.0);
        }
        if !y0.is_finite() {
            (y0, y1) = (0.0, 1.0);
        }
        let pad = |lo: &mut f64, hi: &mut f64| {
            let d = (*hi - *lo).max(1e-9) * 0.05;
            *lo -= d;
            *hi += d;
        };
        pad(&mut x0, &mut x1);
        pad(&mut y0, &mut y1);
        if equal {
            let (sx, sy) = ((x1 - x0) / (W - 2.0 * MARGIN), (y1 - y0) / (H - 2.0 * MARGIN));
            let s = sx.max(sy);
            let (cx, cy) = (0.5 * (x0 + x1), 0.5 * (y0 + y1));
            x0 = cx - s * (W - 2.0 * MARGIN) / 2.0;
            x1 = cx + s * (W - 2.0 * MARGIN) / 2.0;
            y0 = cy - s * (H - 2.0 * MARGIN) / 2.0;
            y1 = cy + s * (H - 2.0 * MARGIN) / 2.0;
        }
        Frame { x0, x1, y0, y1 }
    }

    fn px(&self, x: f64, y: f64) -> (f64, f64) {
        (
            MARGIN + (x - self.x0) / (self.x1 - self.x0) * (W - 2.0 * MARGIN),
            H - MARGIN - (y - self.y0) / (self.y1 - self.y0) * (H - 2.0 * MARGIN),
        )
    }
}

fn polyline(out: &mut String, f: &Frame, pts: impl Iterator<Item = [f64; 2]>, color: &str, extra: &str) {
    let mut d = String::new();
    for [x, y] in pts {
        let (a, b) = f.px(x, y);
        let _ = write!(d, "{a:.2},{b:.2} ");
    }
    let _ = writeln!(
        out,
        r#"<polyline fill="none" stroke="{color}" stroke-width="1.5" {extra} points="{}"/>"#,
        d.trim_end()
    );
}

fn stride(len: usize) -> usize {
    len.div_ceil(MAX_POINTS).max(1)
}

fn frame_svg(f: &Frame, title: &str, xlabel: &str, ylabel: &str, body: &str) -> String {
    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{W}" height="{H}" viewBox="0 0 {W} {H}" font-family="sans-serif" font-size="12">"#
    );
    let _ = writeln!(s, r#"<rect width="{W}" height="{H}" fill="white"/>"#);
    let (l, t, r, b) = (MARGIN, MARGIN, W - MARGIN, H - MARGIN);
    let _ = writeln!(s, r#"<rect x="{l}" y="{t}" width="{}" height="{}" fill="none" stroke="{GREY}"/>"#, r - l, b - t);
    for i in 0..=4 {
        let fx = f.x0 + (f.x1 - f.x0) * i as f64 / 4.0;
        let fy = f.y0 + (f.y1 - f.y0) * i as f64 / 4.0;
        let (px, _) = f.px(fx, f.y0);
        let (_, py) = f.px(f.x0, fy);
        let _ = writeln!(s, r#"<text x="{px:.1}" y="{:.1}" text-anchor="middle">{fx:.3}</text>"#, b + 16.0);
        let _ = writeln!(s, r#"<text x="{:.1}" y="{py:.1}" text-anchor="end" dy="4">{fy:.3}</text>"#, l - 4.0);
    }
    let _ = writeln!(s, r#"<text x="{}" y="24" text-anchor="middle" font-size="14">{title}</text>"#, W / 2.0);
    let _ = writeln!(s, r#"<text x="{}" y="{}" text-anchor="middle">{xlabel}</text>"#, W / 2.0, H - 12.0);
    let _ = writeln!(
        s,
        r#"<text x="14" y="{}" text-anchor="middle" transform="rotate(-90 14 {})">{ylabel}</text>"#,
        H / 2.0,
        H / 2.0
    );
    s.push_str(body);
    s.push_str("</svg>\n");
    s
}

/// Output path `(x0, x1)` of every run, with the safe-set boundary when known.
pub fn path_svg(runs: &[Trajectory], boundary: Option<&Boundary>) -> String {
    let coords = |tr: &Trajectory| -> Vec<[f64; 2]> {
        tr.x.iter().step_by(stride(tr.len())).chain(tr.x.last()).map(|x| [x[0], x[1]]).collect()
    };
    let paths: Vec<Vec<[f64; 2]>> = runs.iter().map(coords).collect();
    let mut all: Vec<[f64; 2]> = paths.iter().flatten().copied().collect();
    if let Some(Boundary::Loop(pts)) = boundary {
        all.extend(pts);
    }
    let f = Frame::fit(all.iter().map(|p| p[0]), all.iter().map(|p| p[1]), true);
    let mut body = String::new();
    match boundary {
        Some(Boundary::Loop(pts)) => polyline(&mut body, &f, pts.iter().copied(), ORANGE, r#"stroke-dasharray="6 4""#),
        Some(Boundary::Line { axis, limit }) => {
            let seg = if *axis == 0 { [[*limit, f.y0], [*limit, f.y1]] } else { [[f.x0, *limit], [f.x1, *limit]] };
            polyline(&mut body, &f, seg.into_iter(), ORANGE, r#"stroke-dasharray="6 4""#);
        }
        None => {}
    }
    for p in &paths {
        polyline(&mut body, &f, p.iter().copied(), BLUE, r#"stroke-opacity="0.8""#);
        if let Some(&[x, y]) = p.first() {
            let (a, b) = f.px(x, y);
            let _ = writeln!(body, r#"<circle cx="{a:.2}" cy="{b:.2}" r="3" fill="{BLUE}"/>"#);
        }
    }
    frame_svg(&f, "output path", "y1", "y2", &body)
}

type Channel = fn(&drdcbf_core::sim::Certificate) -> f64;

/// `h` (blue), `h₀` (orange) and `V` (green) against time for every run.
pub fn channels_svg(runs: &[Trajectory]) -> String {
    let series = |tr: &Trajectory, pick: Channel| -> Vec<[f64; 2]> {
        let s = stride(tr.len());
        let mut idx: Vec<usize> = (0..tr.len()).step_by(s).collect();
        if idx.last() != Some(&(tr.len() - 1)) {
            idx.push(tr.len() - 1);
        }
        idx.into_iter().map(|k| [tr.t[k], pick(&tr.cert[k])]).collect()
    };
    let channels: [(&str, Channel); 3] = [(BLUE, |c| c.h), (ORANGE, |c| c.h0), (GREEN, |c| c.v)];
    let lines: Vec<(&str, Vec<[f64; 2]>)> =
        runs.iter().flat_map(|tr| channels.iter().map(move |(c, p)| (*c, series(tr, *p)))).collect();
    let all = lines.iter().flat_map(|(_, l)| l.iter());
    let f = Frame::fit(all.clone().map(|p| p[0]), all.map(|p| p[1]).chain([0.0]), false);
    let mut body = String::new();
    polyline(&mut body, &f, [[f.x0, 0.0], [f.x1, 0.0]].into_iter(), GREY, r#"stroke-dasharray="2 3""#);
    for (color, l) in &lines {
        polyline(&mut body, &f, l.iter().copied(), color, "");
    }
    for (i, (name, color)) in [("h", BLUE), ("h0", ORANGE), ("V", GREEN)].iter().enumerate() {
        let y = MARGIN + 14.0 + 16.0 * i as f64;
        let x = W - MARGIN - 60.0;
        let _ =
            writeln!(body, r#"<line x1="{x}" y1="{y}" x2="{}" y2="{y}" stroke="{color}" stroke-width="2"/>"#, x + 18.0);
        let _ = writeln!(body, r#"<text x="{}" y="{}">{name}</text>"#, x + 24.0, y + 4.0);
    }
    frame_svg(&f, "certificate channels", "t [s]", "value", &body)
}

#[cfg(test)]
mod tests {
    use super::*;
    use drdcbf_core::sim::Certificate;
    use drdcbf_core::Vector;

    fn run(n: usize) -> Trajectory {
        let c = Certificate {
            h: 0.5,
            h0: 0.7,
            v: 0.1,
            e_norm: 0.0,
            slack: 0.0,
            active: false,
            region: false,
            infeasible: false,
        };
        Trajectory {
            t: (0..n).map(|k| k as f64 * 0.01).collect(),
            x: (0..n).map(|k| Vector::from_column_slice(&[k as f64 * 0.01, 0.0, 0.0])).collect(),
            u: vec![Vector::zeros(2); n],
            cert: vec![c; n],
        }
    }

    #[test]
    fn one_polyline_per_run_plus_boundary() {
        let b = Boundary::from_spec(&CertificateSpec::Ellipse { center: vec![0.0, 0.0], p: vec![1.0, 4.0] }).unwrap();
        let svg = path_svg(&[run(10), run(20), run(5000)], Some(&b));
        assert_eq!(svg.matches("<polyline").count(), 4);
        assert!(svg.starts_with("<svg") && svg.ends_with("</svg>\n"));
        let ch = channels_svg(&[run(10)]);
        assert_eq!(ch.matches("<polyline").count(), 4);
    }

    #[test]
    fn geofence_is_a_line() {
        let b = Boundary::from_spec(&CertificateSpec::GeofenceHocbf { axis: 0, limit: 0.2, alpha_e: 1.0 });
        assert_eq!(b, Some(Boundary::Line { axis: 0, limit: 0.2 }));
    }
}
