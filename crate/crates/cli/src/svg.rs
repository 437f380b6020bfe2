//! Hand-rolled SVG plots. Byte determinism is the point: identical inputs
//! must serialize identically, so everything is emitted with fixed precision
//! and there are no timestamps, random ids, or library version strings.

const WIDTH: f64 = 800.0;
const HEIGHT: f64 = 560.0;
const MARGIN_LEFT: f64 = 78.0;
const MARGIN_RIGHT: f64 = 36.0;
const MARGIN_TOP: f64 = 46.0;
const MARGIN_BOTTOM: f64 = 58.0;
const COLORBAR_WIDTH: f64 = 86.0;

const SERIES_COLORS: [&str; 6] = [
    "#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#17becf",
];

pub struct Series<'a> {
    pub label: &'a str,
    pub points: &'a [(f64, f64)],
}

fn esc(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

fn fmt(v: f64) -> String {
    format!("{v:.2}")
}

fn tick_label(v: f64) -> String {
    let a = v.abs();
    if a != 0.0 && (a >= 1e4 || a < 1e-3) {
        format!("{v:.2e}")
    } else {
        let s = format!("{v:.4}");
        let s = s.trim_end_matches('0').trim_end_matches('.');
        if s.is_empty() || s == "-" { "0".into() } else { s.into() }
    }
}

struct Frame {
    x0: f64,
    x1: f64,
    y0: f64,
    y1: f64,
    px0: f64,
    px1: f64,
    py0: f64,
    py1: f64,
}

impl Frame {
    fn new(x0: f64, x1: f64, y0: f64, y1: f64, right_margin: f64) -> Self {
        Self {
            x0,
            x1,
            y0,
            y1,
            px0: MARGIN_LEFT,
            px1: WIDTH - right_margin,
            py0: HEIGHT - MARGIN_BOTTOM,
            py1: MARGIN_TOP,
        }
    }

    fn sx(&self, x: f64) -> f64 {
        let t = if self.x1 == self.x0 { 0.5 } else { (x - self.x0) / (self.x1 - self.x0) };
        self.px0 + t * (self.px1 - self.px0)
    }

    fn sy(&self, y: f64) -> f64 {
        let t = if self.y1 == self.y0 { 0.5 } else { (y - self.y0) / (self.y1 - self.y0) };
        self.py0 + t * (self.py1 - self.py0)
    }
}

fn header(title: &str) -> String {
    format!(
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{WIDTH}\" height=\"{HEIGHT}\" \
viewBox=\"0 0 {WIDTH} {HEIGHT}\" font-family=\"sans-serif\">\n\
<rect width=\"{WIDTH}\" height=\"{HEIGHT}\" fill=\"white\"/>\n\
<text x=\"{}\" y=\"26\" text-anchor=\"middle\" font-size=\"17\">{}</text>\n",
        WIDTH / 2.0,
        esc(title)
    )
}

fn axes(out: &mut String, frame: &Frame, x_label: &str, y_label: &str) {
    out.push_str(&format!(
        "<rect x=\"{}\" y=\"{}\" width=\"{}\" height=\"{}\" fill=\"none\" stroke=\"#444\"/>\n",
        fmt(frame.px0),
        fmt(frame.py1),
        fmt(frame.px1 - frame.px0),
        fmt(frame.py0 - frame.py1)
    ));
    for k in 0..=5 {
        let t = k as f64 / 5.0;
        let xv = frame.x0 + t * (frame.x1 - frame.x0);
        let yv = frame.y0 + t * (frame.y1 - frame.y0);
        let px = frame.sx(xv);
        let py = frame.sy(yv);
        out.push_str(&format!(
            "<line x1=\"{0}\" y1=\"{1}\" x2=\"{0}\" y2=\"{2}\" stroke=\"#444\"/>\n",
            fmt(px),
            fmt(frame.py0),
            fmt(frame.py0 + 5.0)
        ));
        out.push_str(&format!(
            "<text x=\"{}\" y=\"{}\" text-anchor=\"middle\" font-size=\"12\">{}</text>\n",
            fmt(px),
            fmt(frame.py0 + 20.0),
            tick_label(xv)
        ));
        out.push_str(&format!(
            "<line x1=\"{0}\" y1=\"{2}\" x2=\"{1}\" y2=\"{2}\" stroke=\"#444\"/>\n",
            fmt(frame.px0 - 5.0),
            fmt(frame.px0),
            fmt(py)
        ));
        out.push_str(&format!(
            "<text x=\"{}\" y=\"{}\" text-anchor=\"end\" font-size=\"12\">{}</text>\n",
            fmt(frame.px0 - 9.0),
            fmt(py + 4.0),
            tick_label(yv)
        ));
    }
    out.push_str(&format!(
        "<text x=\"{}\" y=\"{}\" text-anchor=\"middle\" font-size=\"14\">{}</text>\n",
        fmt((frame.px0 + frame.px1) / 2.0),
        fmt(HEIGHT - 14.0),
        esc(x_label)
    ));
    out.push_str(&format!(
        "<text x=\"20\" y=\"{}\" text-anchor=\"middle\" font-size=\"14\" \
transform=\"rotate(-90 20 {})\">{}</text>\n",
        fmt((frame.py0 + frame.py1) / 2.0),
        fmt((frame.py0 + frame.py1) / 2.0),
        esc(y_label)
    ));
}

fn padded_range(lo: f64, hi: f64) -> (f64, f64) {
    if lo == hi {
        return (lo - 0.5, hi + 0.5);
    }
    let pad = 0.05 * (hi - lo);
    (lo - pad, hi + pad)
}

pub fn line_plot(title: &str, x_label: &str, y_label: &str, series: &[Series]) -> String {
    let mut xs = (f64::INFINITY, f64::NEG_INFINITY);
    let mut ys = (f64::INFINITY, f64::NEG_INFINITY);
    for s in series {
        for &(x, y) in s.points {
            xs = (xs.0.min(x), xs.1.max(x));
            ys = (ys.0.min(y), ys.1.max(y));
        }
    }
    if !xs.0.is_finite() {
        xs = (0.0, 1.0);
        ys = (0.0, 1.0);
    }
    let (x0, x1) = padded_range(xs.0, xs.1);
    let (y0, y1) = padded_range(ys.0, ys.1);
    let frame = Frame::new(x0, x1, y0, y1, MARGIN_RIGHT);
    let mut out = header(title);
    axes(&mut out, &frame, x_label, y_label);
    for (si, s) in series.iter().enumerate() {
        let color = SERIES_COLORS[si % SERIES_COLORS.len()];
        let pts: Vec<String> = s
            .points
            .iter()
            .map(|&(x, y)| format!("{},{}", fmt(frame.sx(x)), fmt(frame.sy(y))))
            .collect();
        out.push_str(&format!(
            "<polyline class=\"series\" points=\"{}\" fill=\"none\" stroke=\"{color}\" stroke-width=\"1.8\"/>\n",
            pts.join(" ")
        ));
        for &(x, y) in s.points {
            out.push_str(&format!(
                "<circle cx=\"{}\" cy=\"{}\" r=\"2.6\" fill=\"{color}\"/>\n",
                fmt(frame.sx(x)),
                fmt(frame.sy(y))
            ));
        }
        if series.len() > 1 {
            let ly = MARGIN_TOP + 16.0 * si as f64 + 8.0;
            out.push_str(&format!(
                "<rect x=\"{}\" y=\"{}\" width=\"12\" height=\"4\" fill=\"{color}\"/>\n",
                fmt(frame.px1 - 150.0),
                fmt(ly - 4.0)
            ));
            out.push_str(&format!(
                "<text x=\"{}\" y=\"{}\" font-size=\"12\">{}</text>\n",
                fmt(frame.px1 - 132.0),
                fmt(ly),
                esc(s.label)
            ));
        }
    }
    out.push_str("</svg>\n");
    out
}

/// Five-stop dark-to-bright colormap, linear in RGB between stops.
fn color(t: f64) -> String {
    const STOPS: [(f64, f64, f64); 5] = [
        (0.266, 0.004, 0.329),
        (0.231, 0.322, 0.545),
        (0.129, 0.567, 0.551),
        (0.369, 0.788, 0.382),
        (0.993, 0.906, 0.144),
    ];
    let t = t.clamp(0.0, 1.0) * (STOPS.len() - 1) as f64;
    let i = (t.floor() as usize).min(STOPS.len() - 2);
    let f = t - i as f64;
    let mix = |a: f64, b: f64| ((a + f * (b - a)) * 255.0).round() as u8;
    format!(
        "#{:02x}{:02x}{:02x}",
        mix(STOPS[i].0, STOPS[i + 1].0),
        mix(STOPS[i].1, STOPS[i + 1].1),
        mix(STOPS[i].2, STOPS[i + 1].2)
    )
}

/// Heatmap over a rectangular grid; `values[iy * xs.len() + ix]`. The
/// optional marker (in data coordinates) flags the maximum of interest.
pub fn heatmap(
    title: &str,
    x_label: &str,
    y_label: &str,
    xs: &[f64],
    ys: &[f64],
    values: &[f64],
    marker: Option<(f64, f64)>,
) -> String {
    assert_eq!(values.len(), xs.len() * ys.len());
    let (vmin, vmax) = values
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |a, &v| {
            (a.0.min(v), a.1.max(v))
        });
    let span = if vmax > vmin { vmax - vmin } else { 1.0 };
    // Cell-centered axes: extend half a cell beyond the first/last centers.
    let half = |v: &[f64]| {
        if v.len() > 1 {
            0.5 * (v[1] - v[0])
        } else {
            0.5
        }
    };
    let (hx, hy) = (half(xs), half(ys));
    let frame = Frame::new(
        xs[0] - hx,
        xs[xs.len() - 1] + hx,
        ys[0] - hy,
        ys[ys.len() - 1] + hy,
        MARGIN_RIGHT + COLORBAR_WIDTH,
    );
    let mut out = header(title);
    for (iy, &y) in ys.iter().enumerate() {
        for (ix, &x) in xs.iter().enumerate() {
            let v = values[iy * xs.len() + ix];
            let t = (v - vmin) / span;
            let x_lo = frame.sx(x - hx);
            let x_hi = frame.sx(x + hx);
            let y_lo = frame.sy(y - hy);
            let y_hi = frame.sy(y + hy);
            out.push_str(&format!(
                "<rect class=\"cell\" x=\"{}\" y=\"{}\" width=\"{}\" height=\"{}\" fill=\"{}\"/>\n",
                fmt(x_lo.min(x_hi)),
                fmt(y_lo.min(y_hi)),
                fmt((x_hi - x_lo).abs()),
                fmt((y_hi - y_lo).abs()),
                color(t)
            ));
        }
    }
    axes(&mut out, &frame, x_label, y_label);
    // Colorbar: stacked slabs from vmin (bottom) to vmax (top).
    let bar_x = frame.px1 + 18.0;
    let bar_w = 18.0;
    let steps = 64;
    for k in 0..steps {
        let t0 = k as f64 / steps as f64;
        let y_top = frame.py0 + (t0 + 1.0 / steps as f64) * (frame.py1 - frame.py0);
        let h = (frame.py0 - frame.py1) / steps as f64;
        out.push_str(&format!(
            "<rect class=\"colorbar\" x=\"{}\" y=\"{}\" width=\"{}\" height=\"{}\" fill=\"{}\"/>\n",
            fmt(bar_x),
            fmt(y_top),
            fmt(bar_w),
            fmt(h + 0.5),
            color(t0 + 0.5 / steps as f64)
        ));
    }
    out.push_str(&format!(
        "<rect x=\"{}\" y=\"{}\" width=\"{}\" height=\"{}\" fill=\"none\" stroke=\"#444\"/>\n",
        fmt(bar_x),
        fmt(frame.py1),
        fmt(bar_w),
        fmt(frame.py0 - frame.py1)
    ));
    for (t, v) in [(0.0, vmin), (0.5, (vmin + vmax) / 2.0), (1.0, vmax)] {
        let y = frame.py0 + t * (frame.py1 - frame.py0);
        out.push_str(&format!(
            "<text x=\"{}\" y=\"{}\" font-size=\"11\">{}</text>\n",
            fmt(bar_x + bar_w + 4.0),
            fmt(y + 4.0),
            tick_label(v)
        ));
    }
    if let Some((mx, my)) = marker {
        let (cx, cy) = (frame.sx(mx), frame.sy(my));
        out.push_str(&format!(
            "<circle class=\"marker\" cx=\"{}\" cy=\"{}\" r=\"7\" fill=\"none\" stroke=\"white\" stroke-width=\"2\"/>\n",
            fmt(cx),
            fmt(cy)
        ));
        out.push_str(&format!(
            "<line x1=\"{}\" y1=\"{1}\" x2=\"{2}\" y2=\"{1}\" stroke=\"white\" stroke-width=\"1.5\"/>\n",
            fmt(cx - 11.0),
            fmt(cy),
            fmt(cx + 11.0)
        ));
        out.push_str(&format!(
            "<line x1=\"{0}\" y1=\"{}\" x2=\"{0}\" y2=\"{}\" stroke=\"white\" stroke-width=\"1.5\"/>\n",
            fmt(cx),
            fmt(cy - 11.0),
            fmt(cy + 11.0)
        ));
    }
    out.push_str("</svg>\n");
    out
}
