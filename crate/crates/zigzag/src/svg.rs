//! Self-contained SVG scatter plots of eigenvalues in the complex plane.

use std::fmt::Write as _;

use zigzag_core::charfn::Branch;
use zigzag_core::rootfinder::ComplexRegion;
use zigzag_core::Complex64;

const WIDTH: f64 = 640.0;
const HEIGHT: f64 = 480.0;
const LEFT: f64 = 64.0;
const RIGHT: f64 = 24.0;
const TOP: f64 = 36.0;
const BOTTOM: f64 = 44.0;

pub fn color(branch: Branch) -> &'static str {
    match branch {
        Branch::Full => "black",
        Branch::Plus => "blue",
        Branch::Minus => "red",
    }
}

#[derive(Clone, Debug)]
pub struct Scatter {
    pub title: String,
    pub region: ComplexRegion,
    pub points: Vec<(Complex64, Branch)>,
    /// `(from, to)` pairs drawn as gray arrows.
    pub arrows: Vec<(Complex64, Complex64)>,
}

/// Tick spacing of 1, 2 or 5 times a power of ten giving about `target` ticks.
fn tick_step(span: f64, target: f64) -> f64 {
    let raw = span / target;
    let mag = 10f64.powf(raw.log10().floor());
    [1.0, 2.0, 5.0, 10.0].into_iter().map(|m| m * mag).find(|s| *s >= raw).unwrap_or(10.0 * mag)
}

fn label(v: f64, step: f64) -> String {
    let digits = (-step.log10().floor()).max(0.0) as usize;
    let s = format!("{v:.digits$}");
    if s.trim_start_matches('-').chars().all(|c| c == '0' || c == '.') {
        "0".into()
    } else {
        s
    }
}

struct Frame {
    x0: f64,
    x1: f64,
    y0: f64,
    y1: f64,
}

impl Frame {
    fn new(r: &ComplexRegion) -> Self {
        let (mx, my) = (0.05 * r.width(), 0.05 * r.height());
        Self { x0: r.re_min - mx, x1: r.re_max + mx, y0: r.im_min - my, y1: r.im_max + my }
    }

    fn px(&self, re: f64) -> f64 {
        LEFT + (re - self.x0) / (self.x1 - self.x0) * (WIDTH - LEFT - RIGHT)
    }

    fn py(&self, im: f64) -> f64 {
        HEIGHT - BOTTOM - (im - self.y0) / (self.y1 - self.y0) * (HEIGHT - TOP - BOTTOM)
    }

    fn contains(&self, z: Complex64) -> bool {
        (self.x0..=self.x1).contains(&z.re) && (self.y0..=self.y1).contains(&z.im)
    }
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

fn marker(out: &mut String, x: f64, y: f64, branch: Branch) {
    let c = color(branch);
    let _ = match branch {
        Branch::Minus => writeln!(
            out,
            r#"<rect x="{:.2}" y="{:.2}" width="6" height="6" fill="none" stroke="{c}" stroke-width="1.5"/>"#,
            x - 3.0,
            y - 3.0
        ),
        Branch::Plus => writeln!(out, r#"<circle cx="{x:.2}" cy="{y:.2}" r="3.5" fill="{c}"/>"#),
        Branch::Full => writeln!(out, r#"<circle cx="{x:.2}" cy="{y:.2}" r="3" fill="{c}"/>"#),
    };
}

impl Scatter {
    pub fn render(&self) -> String {
        let f = Frame::new(&self.region);
        let mut s = String::new();
        let _ = writeln!(
            s,
            r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}" font-family="sans-serif" font-size="11">"#
        );
        s.push_str(concat!(
            "<defs><marker id=\"head\" viewBox=\"0 0 10 10\" refX=\"9\" refY=\"5\" markerWidth=\"6\" markerHeight=\"6\" ",
            "orient=\"auto-start-reverse\"><path d=\"M0,0 L10,5 L0,10 z\" fill=\"gray\"/></marker></defs>\n"
        ));
        let _ = writeln!(s, r#"<rect width="{WIDTH}" height="{HEIGHT}" fill="white"/>"#);
        let (l, r, t, b) = (f.px(f.x0), f.px(f.x1), f.py(f.y1), f.py(f.y0));
        let _ = writeln!(
            s,
            r#"<rect x="{l:.2}" y="{t:.2}" width="{:.2}" height="{:.2}" fill="none" stroke="black"/>"#,
            r - l,
            b - t
        );

        let xs = tick_step(f.x1 - f.x0, 6.0);
        let mut k = (f.x0 / xs).ceil() as i64;
        while k as f64 * xs <= f.x1 {
            let v = k as f64 * xs;
            let x = f.px(v);
            let _ = writeln!(s, r#"<line x1="{x:.2}" y1="{b:.2}" x2="{x:.2}" y2="{:.2}" stroke="black"/>"#, b + 4.0);
            let _ = writeln!(s, r#"<text x="{x:.2}" y="{:.2}" text-anchor="middle">{}</text>"#, b + 16.0, label(v, xs));
            k += 1;
        }
        let ys = tick_step(f.y1 - f.y0, 8.0);
        let mut k = (f.y0 / ys).ceil() as i64;
        while k as f64 * ys <= f.y1 {
            let v = k as f64 * ys;
            let y = f.py(v);
            let _ = writeln!(s, r#"<line x1="{:.2}" y1="{y:.2}" x2="{l:.2}" y2="{y:.2}" stroke="black"/>"#, l - 4.0);
            let _ =
                writeln!(s, r#"<text x="{:.2}" y="{:.2}" text-anchor="end">{}</text>"#, l - 6.0, y + 4.0, label(v, ys));
            k += 1;
        }
        if f.x0 < 0.0 && f.x1 > 0.0 {
            let x = f.px(0.0);
            let _ = writeln!(
                s,
                r##"<line x1="{x:.2}" y1="{t:.2}" x2="{x:.2}" y2="{b:.2}" stroke="#bbb" stroke-dasharray="3,3"/>"##
            );
        }
        if f.y0 < 0.0 && f.y1 > 0.0 {
            let y = f.py(0.0);
            let _ = writeln!(
                s,
                r##"<line x1="{l:.2}" y1="{y:.2}" x2="{r:.2}" y2="{y:.2}" stroke="#bbb" stroke-dasharray="3,3"/>"##
            );
        }
        let _ =
            writeln!(s, r#"<text x="{:.2}" y="{:.2}" text-anchor="middle">Re γ</text>"#, (l + r) / 2.0, HEIGHT - 8.0);
        let _ = writeln!(
            s,
            r#"<text x="14" y="{:.2}" text-anchor="middle" transform="rotate(-90 14 {:.2})">Im γ</text>"#,
            (t + b) / 2.0,
            (t + b) / 2.0
        );
        let _ = writeln!(
            s,
            r#"<text x="{:.2}" y="22" text-anchor="middle" font-size="13">{}</text>"#,
            (l + r) / 2.0,
            escape(&self.title)
        );

        for (from, to) in &self.arrows {
            if from == to || !f.contains(*from) {
                continue;
            }
            let _ = writeln!(
                s,
                r#"<line class="arrow" x1="{:.2}" y1="{:.2}" x2="{:.2}" y2="{:.2}" stroke="gray" stroke-width="1.2" marker-end="url(#head)"/>"#,
                f.px(from.re),
                f.py(from.im),
                f.px(to.re),
                f.py(to.im)
            );
        }
        for (z, branch) in self.points.iter().filter(|(z, _)| f.contains(*z)) {
            s.push_str(&format!(r#"<g class="{}">"#, branch.name()));
            s.push('\n');
            marker(&mut s, f.px(z.re), f.py(z.im), *branch);
            s.push_str("</g>\n");
        }

        let mut branches: Vec<Branch> = self.points.iter().map(|p| p.1).collect();
        branches.sort();
        branches.dedup();
        for (i, branch) in branches.iter().enumerate() {
            let y = t + 14.0 + 16.0 * i as f64;
            marker(&mut s, r - 70.0, y, *branch);
            let name = match branch {
                Branch::Full => "Σ",
                Branch::Plus => "Σ⁺",
                Branch::Minus => "Σ⁻",
            };
            let _ = writeln!(s, r#"<text x="{:.2}" y="{:.2}">{name}</text>"#, r - 60.0, y + 4.0);
        }
        s.push_str("</svg>\n");
        s
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn plot() -> Scatter {
        let c = Complex64::new;
        Scatter {
            title: "a < b".into(),
            region: ComplexRegion::new(-2.0, 0.1, -3.0, 3.0).unwrap(),
            points: vec![(c(0.0, 0.0), Branch::Plus), (c(-0.4, 1.0), Branch::Minus), (c(-0.4, -1.0), Branch::Minus)],
            arrows: vec![(c(0.0, 0.0), c(0.0, 0.0)), (c(-0.4, 1.0), c(-0.5, 1.0))],
        }
    }

    #[test]
    fn self_contained_and_deterministic() {
        let a = plot().render();
        assert_eq!(a, plot().render());
        assert!(a.starts_with("<svg xmlns=\"http://www.w3.org/2000/svg\""));
        assert!(a.trim_end().ends_with("</svg>"));
        assert!(!a.contains("href") && !a.contains("<image") && !a.contains("@import"));
        assert!(a.contains("a &lt; b"));
    }

    #[test]
    fn markers_and_arrows() {
        let a = plot().render();
        assert_eq!(a.matches("<g class=\"minus\">").count(), 2);
        assert_eq!(a.matches("<g class=\"plus\">").count(), 1);
        // the zero-length arrow is not drawn
        assert_eq!(a.matches("class=\"arrow\"").count(), 1);
        assert!(a.contains("fill=\"blue\"") && a.contains("stroke=\"red\""));
    }

    #[test]
    fn ticks() {
        assert_eq!(tick_step(10.0, 5.0), 2.0);
        assert_eq!(tick_step(0.7, 6.0), 0.2);
        assert_eq!(label(-0.0, 0.5), "0");
        assert_eq!(label(1.5, 0.5), "1.5");
        assert_eq!(label(-2.0, 1.0), "-2");
    }
}
