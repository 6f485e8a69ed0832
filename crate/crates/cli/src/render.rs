//! Isometric SVG drawing of a packing, one panel per bin.

use std::fmt::Write as _;

use binpack3d_core::{Instance, Placement};

const PALETTE: [&str; 10] = [
    "#1f77b4", "#ff7f0e", "#2ca02c", "#d62728", "#9467bd", "#8c564b", "#e377c2", "#7f7f7f", "#bcbd22", "#17becf",
];

/// Panel width in pixels; height follows from the bin proportions.
const PANEL: f64 = 320.0;
const MARGIN: f64 = 20.0;
const COS30: f64 = 0.866_025_403_784_438_6;

struct Projection {
    scale: f64,
    dx: f64,
    dy: f64,
}

impl Projection {
    fn point(&self, x: f64, y: f64, z: f64) -> (f64, f64) {
        (
            self.dx + (x - y) * COS30 * self.scale,
            self.dy + ((x + y) * 0.5 - z) * self.scale,
        )
    }

    fn path(&self, corners: &[[f64; 3]]) -> String {
        let mut d = String::new();
        for (n, c) in corners.iter().enumerate() {
            let (sx, sy) = self.point(c[0], c[1], c[2]);
            let _ = write!(d, "{}{sx:.2},{sy:.2} ", if n == 0 { "M" } else { "L" });
        }
        d.push('Z');
        d
    }
}

/// Renders `placements` (global coordinates) as an SVG document. Output is
/// a pure function of the inputs.
pub fn render_svg(instance: &Instance, placements: &[Placement]) -> String {
    let bin = instance.bin();
    let (l, w, h) = (bin.length as f64, bin.width as f64, bin.height as f64);
    let used = placements.iter().map(|p| p.bin).max().unwrap_or(1).max(1);

    // Projected extent of the bin box, in bin units.
    let span_x = (l + w) * COS30;
    let span_y = (l + w) * 0.5 + h;
    let scale = PANEL / span_x;
    let panel_h = span_y * scale;
    let width = used as f64 * (PANEL + MARGIN) + MARGIN;
    let height = panel_h + 2.0 * MARGIN + 20.0;

    let mut svg = String::new();
    let _ = writeln!(
        svg,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{width:.2}" height="{height:.2}" viewBox="0 0 {width:.2} {height:.2}">"#
    );
    let _ = writeln!(svg, r#"<rect width="100%" height="100%" fill="white"/>"#);

    for j in 1..=used {
        let left = MARGIN + (j - 1) as f64 * (PANEL + MARGIN);
        let proj = Projection {
            scale,
            dx: left + w * COS30 * scale,
            dy: MARGIN + 20.0 + h * scale,
        };
        let origin = (j - 1) as f64 * l;
        let _ = writeln!(svg, r#"<g class="bin" id="bin-{j}">"#);
        let _ = writeln!(
            svg,
            r#"<text x="{:.2}" y="{:.2}" font-family="sans-serif" font-size="14">bin {j}</text>"#,
            left,
            MARGIN + 6.0
        );

        let mut inside: Vec<&Placement> = placements.iter().filter(|p| p.bin == j).collect();
        // Back to front: boxes nearer the viewer (large x, y, z) are drawn last.
        inside.sort_by_key(|p| (p.x as u64 + p.y as u64 + p.z as u64, p.z, p.item));
        for p in inside {
            let Some(item) = instance.items().get(p.item) else { continue };
            let d = p.orientation.apply(item.dims());
            let x0 = p.x as f64 - origin;
            let (y0, z0) = (p.y as f64, p.z as f64);
            let (x1, y1, z1) = (x0 + d[0] as f64, y0 + d[1] as f64, z0 + d[2] as f64);
            let colour = PALETTE[item.category as usize % PALETTE.len()];
            let faces = [
                (vec![[x0, y0, z1], [x1, y0, z1], [x1, y1, z1], [x0, y1, z1]], 1.0),
                (vec![[x1, y0, z0], [x1, y1, z0], [x1, y1, z1], [x1, y0, z1]], 0.8),
                (vec![[x0, y1, z0], [x1, y1, z0], [x1, y1, z1], [x0, y1, z1]], 0.65),
            ];
            let _ = writeln!(svg, r#"<g class="item" id="item-{}">"#, p.item);
            for (corners, opacity) in faces {
                let _ = writeln!(
                    svg,
                    r##"<path d="{}" fill="{colour}" fill-opacity="{opacity:.2}" stroke="#333333" stroke-width="0.50"/>"##,
                    proj.path(&corners)
                );
            }
            svg.push_str("</g>\n");
        }

        for (a, b) in bin_edges(l, w, h) {
            let (ax, ay) = proj.point(a[0], a[1], a[2]);
            let (bx, by) = proj.point(b[0], b[1], b[2]);
            let _ = writeln!(
                svg,
                r#"<line x1="{ax:.2}" y1="{ay:.2}" x2="{bx:.2}" y2="{by:.2}" stroke="red" stroke-width="1.50"/>"#
            );
        }
        svg.push_str("</g>\n");
    }
    svg.push_str("</svg>\n");
    svg
}

fn bin_edges(l: f64, w: f64, h: f64) -> Vec<([f64; 3], [f64; 3])> {
    let c = |i: u8| {
        [
            if i & 1 != 0 { l } else { 0.0 },
            if i & 2 != 0 { w } else { 0.0 },
            if i & 4 != 0 { h } else { 0.0 },
        ]
    };
    let mut edges = Vec::with_capacity(12);
    for a in 0u8..8 {
        for bit in [1u8, 2, 4] {
            if a & bit == 0 {
                edges.push((c(a), c(a | bit)));
            }
        }
    }
    edges
}
