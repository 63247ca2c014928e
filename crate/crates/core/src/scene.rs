//! Representations: ordered graphic instructions in device coordinates, with
//! a canonical text dump and an SVG backend.

use std::fmt::Write;

use serde::Serialize;

use crate::table::format_number;

/// Axis-aligned rectangle in normalized space, origin bottom-left, y up.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Rect {
    pub x: f64,
    pub y: f64,
    pub width: f64,
    pub height: f64,
}

impl Rect {
    pub const UNIT: Rect = Rect {
        x: 0.0,
        y: 0.0,
        width: 1.0,
        height: 1.0,
    };

    pub fn new(x: f64, y: f64, width: f64, height: f64) -> Rect {
        Rect {
            x,
            y,
            width,
            height,
        }
    }

    /// Maps a rectangle given in this rectangle's local unit coordinates to
    /// the enclosing space.
    pub fn compose(&self, local: &Rect) -> Rect {
        Rect {
            x: self.x + local.x * self.width,
            y: self.y + local.y * self.height,
            width: local.width * self.width,
            height: local.height * self.height,
        }
    }

    pub fn point(&self, x: f64, y: f64) -> (f64, f64) {
        (self.x + x * self.width, self.y + y * self.height)
    }

    /// Shrinks by `m` of the width and height on every side.
    pub fn inset(&self, m: f64) -> Rect {
        Rect {
            x: self.x + m * self.width,
            y: self.y + m * self.height,
            width: self.width * (1.0 - 2.0 * m),
            height: self.height * (1.0 - 2.0 * m),
        }
    }
}

/// Device pixel size.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Device {
    pub width: f64,
    pub height: f64,
}

/// Places local rect `r` inside `viewport` and converts to device pixels,
/// flipping y. Returns (x, y, w, h) with y the top edge.
pub fn resolve_device(r: &Rect, viewport: &Rect, device: Device) -> (f64, f64, f64, f64) {
    let a = viewport.compose(r);
    let (x, top) = device_point(a.x, a.y + a.height, device);
    (x, top, a.width * device.width, a.height * device.height)
}

/// Converts an absolute normalized point to device pixels.
pub fn device_point(x: f64, y: f64, device: Device) -> (f64, f64) {
    (x * device.width, (1.0 - y) * device.height)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "op", rename_all = "camelCase")]
pub enum Instruction {
    FillRectangle { x: f64, y: f64, w: f64, h: f64 },
    FillEllipse { x: f64, y: f64, w: f64, h: f64 },
    Line { x1: f64, y1: f64, x2: f64, y2: f64 },
    Polyline { points: Vec<(f64, f64)> },
    DrawString { text: String, x: f64, y: f64 },
    SetColor { r: f64, g: f64, b: f64 },
    SetFont { size: f64 },
}

impl Instruction {
    pub fn is_geometric(&self) -> bool {
        !matches!(
            self,
            Instruction::SetColor { .. } | Instruction::SetFont { .. }
        )
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Representation {
    pub instructions: Vec<Instruction>,
    pub device_width: f64,
    pub device_height: f64,
}

impl Representation {
    pub fn new(device: Device) -> Representation {
        Representation {
            instructions: Vec::new(),
            device_width: device.width,
            device_height: device.height,
        }
    }

    pub fn geometric_count(&self) -> usize {
        self.instructions
            .iter()
            .filter(|i| i.is_geometric())
            .count()
    }
}

fn quote(s: &str) -> String {
    let mut out = String::with_capacity(s.len() + 2);
    out.push('"');
    for c in s.chars() {
        match c {
            '"' => out.push_str("\\\""),
            '\\' => out.push_str("\\\\"),
            '\n' => out.push_str("\\n"),
            c => out.push(c),
        }
    }
    out.push('"');
    out
}

fn args(nums: &[f64]) -> String {
    nums.iter()
        .map(|v| format_number(*v))
        .collect::<Vec<_>>()
        .join(", ")
}

/// One instruction per line, `kind(arg, ...);`.
pub fn to_text(rep: &Representation) -> String {
    let mut out = String::new();
    for ins in &rep.instructions {
        let _ = match ins {
            Instruction::FillRectangle { x, y, w, h } => {
                writeln!(out, "fillRectangle({});", args(&[*x, *y, *w, *h]))
            }
            Instruction::FillEllipse { x, y, w, h } => {
                writeln!(out, "fillEllipse({});", args(&[*x, *y, *w, *h]))
            }
            Instruction::Line { x1, y1, x2, y2 } => {
                writeln!(out, "line({});", args(&[*x1, *y1, *x2, *y2]))
            }
            Instruction::Polyline { points } => {
                let flat: Vec<f64> = points.iter().flat_map(|(x, y)| [*x, *y]).collect();
                writeln!(out, "polyline({});", args(&flat))
            }
            Instruction::DrawString { text, x, y } => {
                writeln!(out, "drawString({}, {});", quote(text), args(&[*x, *y]))
            }
            Instruction::SetColor { r, g, b } => {
                writeln!(out, "setColor({});", args(&[*r, *g, *b]))
            }
            Instruction::SetFont { size } => writeln!(out, "setFont({});", args(&[*size])),
        };
    }
    out
}

fn xml_escape(s: &str) -> String {
    s.replace('&', "&amp;")
        .replace('<', "&lt;")
        .replace('>', "&gt;")
        .replace('"', "&quot;")
}

fn channel(c: f64) -> u8 {
    (c.clamp(0.0, 1.0) * 255.0).round() as u8
}

fn rgb(c: (f64, f64, f64)) -> String {
    format!("rgb({},{},{})", channel(c.0), channel(c.1), channel(c.2))
}

/// Color every primitive starts with until a `setColor` arrives.
pub const DEFAULT_COLOR: (f64, f64, f64) = (0.5, 0.5, 0.5);
pub const DEFAULT_FONT_SIZE: f64 = 12.0;

/// SVG document with one element per geometric instruction.
pub fn to_svg(rep: &Representation) -> String {
    let (w, h) = (
        format_number(rep.device_width),
        format_number(rep.device_height),
    );
    let mut out = format!(
        "<svg xmlns=\"http://www.w3.org/2000/svg\" version=\"1.1\" width=\"{w}\" height=\"{h}\" viewBox=\"0 0 {w} {h}\">\n"
    );
    let mut color = rgb(DEFAULT_COLOR);
    let mut font = DEFAULT_FONT_SIZE;
    let n = format_number;
    for ins in &rep.instructions {
        let _ = match ins {
            Instruction::SetColor { r, g, b } => {
                color = rgb((*r, *g, *b));
                Ok(())
            }
            Instruction::SetFont { size } => {
                font = *size;
                Ok(())
            }
            Instruction::FillRectangle { x, y, w, h } => writeln!(
                out,
                "<rect x=\"{}\" y=\"{}\" width=\"{}\" height=\"{}\" fill=\"{color}\"/>",
                n(*x),
                n(*y),
                n(*w),
                n(*h)
            ),
            Instruction::FillEllipse { x, y, w, h } => writeln!(
                out,
                "<ellipse cx=\"{}\" cy=\"{}\" rx=\"{}\" ry=\"{}\" fill=\"{color}\"/>",
                n(x + w / 2.0),
                n(y + h / 2.0),
                n(w / 2.0),
                n(h / 2.0)
            ),
            Instruction::Line { x1, y1, x2, y2 } => writeln!(
                out,
                "<line x1=\"{}\" y1=\"{}\" x2=\"{}\" y2=\"{}\" stroke=\"{color}\"/>",
                n(*x1),
                n(*y1),
                n(*x2),
                n(*y2)
            ),
            Instruction::Polyline { points } => {
                let pts: Vec<String> = points
                    .iter()
                    .map(|(x, y)| format!("{},{}", n(*x), n(*y)))
                    .collect();
                writeln!(
                    out,
                    "<polyline points=\"{}\" fill=\"none\" stroke=\"{color}\"/>",
                    pts.join(" ")
                )
            }
            Instruction::DrawString { text, x, y } => writeln!(
                out,
                "<text x=\"{}\" y=\"{}\" font-size=\"{}\" fill=\"{color}\">{}</text>",
                n(*x),
                n(*y),
                n(font),
                xml_escape(text)
            ),
        };
    }
    out.push_str("</svg>\n");
    out
}

/// HSV to RGB with all components in [0, 1]; hue is a fraction of a turn.
/// Inputs outside [0, 1] are clamped.
pub fn hsv_to_rgb(h: f64, s: f64, v: f64) -> (f64, f64, f64) {
    let (h, s, v) = (h.clamp(0.0, 1.0), s.clamp(0.0, 1.0), v.clamp(0.0, 1.0));
    let h6 = if h >= 1.0 { 0.0 } else { h * 6.0 };
    let sector = h6.floor();
    let f = h6 - sector;
    let p = v * (1.0 - s);
    let q = v * (1.0 - s * f);
    let t = v * (1.0 - s * (1.0 - f));
    match sector as u8 {
        0 => (v, t, p),
        1 => (q, v, p),
        2 => (p, v, t),
        3 => (p, q, v),
        4 => (t, p, v),
        _ => (v, p, q),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const DEV: Device = Device {
        width: 800.0,
        height: 600.0,
    };

    #[test]
    fn identity_fill() {
        assert_eq!(
            resolve_device(&Rect::UNIT, &Rect::UNIT, DEV),
            (0.0, 0.0, 800.0, 600.0)
        );
    }

    #[test]
    fn lower_left_quadrant_after_flip() {
        let d = Device {
            width: 100.0,
            height: 100.0,
        };
        assert_eq!(
            resolve_device(&Rect::new(0.0, 0.0, 0.5, 0.5), &Rect::UNIT, d),
            (0.0, 50.0, 50.0, 50.0)
        );
    }

    #[test]
    fn nested_viewport() {
        // child (0,0,1,.5) in parent (.5,0,.5,1): the parent's lower half,
        // i.e. normalized (.5, 0, .5, .5); device top edge at y = 300.
        let parent = Rect::new(0.5, 0.0, 0.5, 1.0);
        let got = resolve_device(&Rect::new(0.0, 0.0, 1.0, 0.5), &parent, DEV);
        assert_eq!(got, (400.0, 300.0, 400.0, 300.0));
    }

    #[test]
    fn composition_is_consistent() {
        let a = Rect::new(0.1, 0.2, 0.5, 0.4);
        let b = Rect::new(0.3, 0.1, 0.5, 0.5);
        let c = Rect::new(0.25, 0.5, 0.5, 0.25);
        let nested = resolve_device(&c, &a.compose(&b), DEV);
        let flat = resolve_device(&b.compose(&c), &a, DEV);
        for (x, y) in [
            (nested.0, flat.0),
            (nested.1, flat.1),
            (nested.2, flat.2),
            (nested.3, flat.3),
        ] {
            assert!((x - y).abs() < 1e-9);
        }
    }

    #[test]
    fn text_dump() {
        let mut rep = Representation::new(DEV);
        assert_eq!(to_text(&rep), "");
        rep.instructions.push(Instruction::SetColor {
            r: 0.0,
            g: 0.0,
            b: 0.0,
        });
        rep.instructions.push(Instruction::FillRectangle {
            x: 0.0,
            y: 12.5,
            w: 80.0,
            h: 1.0 / 3.0,
        });
        rep.instructions.push(Instruction::DrawString {
            text: "say \"hi\"".into(),
            x: -0.0,
            y: 20.0,
        });
        assert_eq!(
            to_text(&rep),
            "setColor(0, 0, 0);\nfillRectangle(0, 12.5, 80, 0.3333333333333333);\ndrawString(\"say \\\"hi\\\"\", 0, 20);\n"
        );
    }

    #[test]
    fn svg_counts_and_colors() {
        let mut rep = Representation::new(DEV);
        rep.instructions.push(Instruction::SetColor {
            r: 0.0,
            g: 0.0,
            b: 0.0,
        });
        for i in 0..3 {
            rep.instructions.push(Instruction::FillEllipse {
                x: f64::from(i),
                y: 0.0,
                w: 2.0,
                h: 2.0,
            });
        }
        let svg = to_svg(&rep);
        assert_eq!(svg.matches("<ellipse").count(), 3);
        assert!(svg.contains("fill=\"rgb(0,0,0)\""));
        let (r, g, b) = hsv_to_rgb(0.75, 0.5, 1.0);
        assert_eq!(rgb((r, g, b)), "rgb(191,128,255)");
    }

    #[test]
    fn hsv_conversion() {
        assert_eq!(hsv_to_rgb(0.3, 0.9, 0.0), (0.0, 0.0, 0.0));
        assert_eq!(hsv_to_rgb(0.6, 0.0, 1.0), (1.0, 1.0, 1.0));
        // sector 4: (t, p, v) with f = 0.5, p = 0.5, t = 1 - 0.5 * 0.5 = 0.75
        assert_eq!(hsv_to_rgb(0.75, 0.5, 1.0), (0.75, 0.5, 1.0));
        assert_eq!(hsv_to_rgb(1.0, 1.0, 1.0), (1.0, 0.0, 0.0));
    }
}
