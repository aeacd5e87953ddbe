//! SVG rendering of layouts: the table bed, six pocket arcs and the balls in
//! standard 9-ball colors, under an explicit affine viewport.

use blkit::{Layout, PocketIndex, TableGeometry};

const SCALE: f64 = 4.0;
const MARGIN: f64 = 24.0;

fn ball_color(num: u8) -> &'static str {
    match num {
        0 => "#ffffff",
        1 => "#ffc107",
        2 => "#1565c0",
        3 => "#d32f2f",
        4 => "#6a1b9a",
        5 => "#ef6c00",
        6 => "#2e7d32",
        7 => "#8d2f23",
        8 => "#111111",
        _ => "#ffc107",
    }
}

/// Maps table coordinates to viewport pixels: x scales directly, y flips so
/// the origin sits at the bottom-left of the drawn bed.
fn view(geom: &TableGeometry, x: f64, y: f64) -> (f64, f64) {
    (MARGIN + x * SCALE, MARGIN + (geom.width - y) * SCALE)
}

pub fn layout_to_svg(layout: &Layout, geom: &TableGeometry) -> String {
    let width = geom.length * SCALE + 2.0 * MARGIN;
    let height = geom.width * SCALE + 2.0 * MARGIN;
    let r = geom.ball_radius * SCALE;
    let pocket_r = 3.0 * geom.ball_radius * SCALE / 2.0;
    let mut out = String::new();
    out.push_str(&format!(
        "<svg xmlns=\"http://www.w3.org/2000/svg\" version=\"1.1\" width=\"{width}\" height=\"{height}\" viewBox=\"0 0 {width} {height}\">\n"
    ));
    out.push_str(&format!(
        "  <desc>layout {} on a {}x{} table; viewport: px = {MARGIN} + {SCALE} * x, py = {MARGIN} + {SCALE} * ({} - y)</desc>\n",
        layout.id, geom.length, geom.width, geom.width
    ));
    // Rails and bed.
    out.push_str(&format!(
        "  <rect x=\"{}\" y=\"{}\" width=\"{}\" height=\"{}\" fill=\"#5d4037\" rx=\"10\"/>\n",
        MARGIN / 3.0,
        MARGIN / 3.0,
        width - 2.0 * MARGIN / 3.0,
        height - 2.0 * MARGIN / 3.0
    ));
    out.push_str(&format!(
        "  <rect x=\"{MARGIN}\" y=\"{MARGIN}\" width=\"{}\" height=\"{}\" fill=\"#1b5e20\"/>\n",
        geom.length * SCALE,
        geom.width * SCALE
    ));
    for pocket in PocketIndex::ALL {
        let (px, py) = geom.pocket(pocket);
        let (vx, vy) = view(geom, px, py);
        out.push_str(&format!(
            "  <circle cx=\"{vx}\" cy=\"{vy}\" r=\"{pocket_r}\" fill=\"#000000\"/>\n"
        ));
    }
    for ball in &layout.balls {
        let (cx, cy) = view(geom, ball.x, ball.y);
        let color = ball_color(ball.num);
        out.push_str(&format!(
            "  <g data-num=\"{}\" data-x=\"{:.2}\" data-y=\"{:.2}\">\n",
            ball.num, ball.x, ball.y
        ));
        if ball.num == 9 {
            // The 9 is striped: white ball with a colored band.
            out.push_str(&format!(
                "    <circle cx=\"{cx}\" cy=\"{cy}\" r=\"{r}\" fill=\"#ffffff\" stroke=\"#333333\" stroke-width=\"0.75\"/>\n"
            ));
            out.push_str(&format!(
                "    <clipPath id=\"clip-{id}\"><circle cx=\"{cx}\" cy=\"{cy}\" r=\"{r}\"/></clipPath>\n",
                id = ball.num
            ));
            out.push_str(&format!(
                "    <rect x=\"{}\" y=\"{}\" width=\"{}\" height=\"{}\" fill=\"{color}\" clip-path=\"url(#clip-{})\"/>\n",
                cx - r,
                cy - r * 0.45,
                2.0 * r,
                0.9 * r,
                ball.num
            ));
        } else {
            out.push_str(&format!(
                "    <circle cx=\"{cx}\" cy=\"{cy}\" r=\"{r}\" fill=\"{color}\" stroke=\"#333333\" stroke-width=\"0.75\"/>\n"
            ));
        }
        let text_fill = if ball.num == 8 { "#ffffff" } else { "#000000" };
        out.push_str(&format!(
            "    <text x=\"{cx}\" y=\"{}\" font-size=\"{}\" text-anchor=\"middle\" fill=\"{text_fill}\" font-family=\"sans-serif\">{}</text>\n",
            cy + r * 0.4,
            r * 1.1,
            ball.num
        ));
        out.push_str("  </g>\n");
    }
    out.push_str("</svg>\n");
    out
}
