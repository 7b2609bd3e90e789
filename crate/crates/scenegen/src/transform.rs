//! Geometric transforms on scenes and bare `[C,H,W]` image tensors.
//!
//! Rotation is clockwise: a quarter turn maps pixel `(r, c)` of an `N x N`
//! image to `(c, N - 1 - r)`.

use numcore::Tensor;

use crate::error::{invalid, Result};
use crate::types::{Point, Scene, ScenePoints};

fn dims(t: &Tensor) -> Result<(usize, usize, usize)> {
    match *t.shape() {
        [c, h, w] => Ok((c, h, w)),
        _ => invalid(format!("expected a [C,H,W] image, got {:?}", t.shape())),
    }
}

fn remap(t: &Tensor, out_h: usize, out_w: usize, src: impl Fn(usize, usize) -> (usize, usize)) -> Result<Tensor> {
    let (c, h, w) = dims(t)?;
    let x = t.data();
    let mut out = Vec::with_capacity(c * out_h * out_w);
    for ch in 0..c {
        for r in 0..out_h {
            for col in 0..out_w {
                let (sr, sc) = src(r, col);
                out.push(x[(ch * h + sr) * w + sc]);
            }
        }
    }
    Ok(Tensor::new(vec![c, out_h, out_w], out)?)
}

/// Reverse the row order of an image.
pub fn flip_image(t: &Tensor) -> Result<Tensor> {
    let (_, h, w) = dims(t)?;
    remap(t, h, w, |r, c| (h - 1 - r, c))
}

/// Reverse the column order of an image.
pub fn mirror_image(t: &Tensor) -> Result<Tensor> {
    let (_, h, w) = dims(t)?;
    remap(t, h, w, |r, c| (r, w - 1 - c))
}

/// Clockwise rotation by `quarter_turns` in `{1, 2, 3}`.
pub fn rotate_image(t: &Tensor, quarter_turns: u8) -> Result<Tensor> {
    let (_, h, w) = dims(t)?;
    check_turns(quarter_turns, h, w)?;
    match quarter_turns {
        // out(r, c) = in(N-1-c, r)
        1 => remap(t, w, h, |r, c| (h - 1 - c, r)),
        2 => remap(t, h, w, |r, c| (h - 1 - r, w - 1 - c)),
        // out(r, c) = in(c, N-1-r)
        _ => remap(t, w, h, |r, c| (c, w - 1 - r)),
    }
}

fn check_turns(quarter_turns: u8, h: usize, w: usize) -> Result<()> {
    if !(1..=3).contains(&quarter_turns) {
        return invalid(format!("quarter_turns must be 1, 2 or 3, got {quarter_turns}"));
    }
    if quarter_turns != 2 && h != w {
        return invalid(format!("cannot rotate a non-square {h}x{w} image by 90 degrees"));
    }
    Ok(())
}

fn map_points(points: &ScenePoints, f: impl Fn(Point) -> Point) -> ScenePoints {
    ScenePoints(points.iter().map(|&p| f(p)).collect())
}

/// Upside-down flip; toggles the orientation tag.
pub fn flip_vertical(scene: &Scene) -> Result<Scene> {
    let last = (scene.height() - 1) as f64;
    Ok(Scene {
        image: flip_image(&scene.image)?,
        points: map_points(&scene.points, |p| Point {
            row: last - p.row,
            col: p.col,
        }),
        domain: scene.domain,
        orientation: scene.orientation.toggled(),
    })
}

/// Left-right mirror; orientation tag unchanged.
pub fn mirror_horizontal(scene: &Scene) -> Result<Scene> {
    let last = (scene.width() - 1) as f64;
    Ok(Scene {
        image: mirror_image(&scene.image)?,
        points: map_points(&scene.points, |p| Point {
            row: p.row,
            col: last - p.col,
        }),
        domain: scene.domain,
        orientation: scene.orientation,
    })
}

/// Clockwise rotation by `quarter_turns` in `{1, 2, 3}`; 90 and 270 degrees
/// need a square image.
pub fn rotate(scene: &Scene, quarter_turns: u8) -> Result<Scene> {
    let (h, w) = (scene.height(), scene.width());
    check_turns(quarter_turns, h, w)?;
    let (lr, lc) = ((h - 1) as f64, (w - 1) as f64);
    let points = match quarter_turns {
        1 => map_points(&scene.points, |p| Point {
            row: p.col,
            col: lr - p.row,
        }),
        2 => map_points(&scene.points, |p| Point {
            row: lr - p.row,
            col: lc - p.col,
        }),
        _ => map_points(&scene.points, |p| Point {
            row: lc - p.col,
            col: p.row,
        }),
    };
    Ok(Scene {
        image: rotate_image(&scene.image, quarter_turns)?,
        points,
        domain: scene.domain,
        orientation: scene.orientation,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::params::DomainParams;
    use crate::types::{Domain, Orientation};

    fn scene(h: usize, w: usize, seed: u64) -> Scene {
        let p = DomainParams::source();
        let pts = crate::sample_scene_points(h, w, 12.0, &p, seed).unwrap();
        crate::render_scene(&pts, h, w, &p, seed).unwrap()
    }

    #[test]
    fn flip_is_an_involution() {
        let s = scene(20, 13, 5);
        let f = flip_vertical(&s).unwrap();
        assert_eq!(f.orientation, Orientation::Flipped);
        let back = flip_vertical(&f).unwrap();
        assert_eq!(back, s);
        for (a, b) in back.points.iter().zip(s.points.iter()) {
            assert_eq!(a.row.to_bits(), b.row.to_bits());
        }
    }

    #[test]
    fn single_row_flip_keeps_pixels() {
        let s = scene(1, 9, 2);
        assert_eq!(flip_vertical(&s).unwrap().image, s.image);
    }

    #[test]
    fn flip_maps_row_index() {
        let s = Scene {
            image: Tensor::zeros(&[1, 64, 64]),
            points: ScenePoints(vec![Point { row: 3.0, col: 10.0 }]),
            domain: Domain::Target,
            orientation: Orientation::Upright,
        };
        let f = flip_vertical(&s).unwrap();
        assert_eq!(f.points.0[0], Point { row: 60.0, col: 10.0 });
    }

    #[test]
    fn four_quarter_turns_are_identity() {
        let s = scene(16, 16, 8);
        let mut r = s.clone();
        for _ in 0..4 {
            r = rotate(&r, 1).unwrap();
        }
        assert_eq!(r, s);
        let back = rotate(&rotate(&s, 3).unwrap(), 1).unwrap();
        assert_eq!(back, s);
    }

    #[test]
    fn half_turn_is_flip_then_mirror() {
        let s = scene(12, 7, 4);
        let a = rotate(&s, 2).unwrap();
        let b = mirror_horizontal(&flip_vertical(&s).unwrap()).unwrap();
        assert_eq!(a.image, b.image);
        assert_eq!(a.points, b.points);
    }

    #[test]
    fn quarter_turn_marker_convention() {
        let mut img = Tensor::zeros(&[1, 64, 64]);
        img.data_mut()[0] = 1.0;
        let s = Scene {
            image: img,
            points: ScenePoints(vec![Point { row: 0.0, col: 0.0 }]),
            domain: Domain::Source,
            orientation: Orientation::Upright,
        };
        let r = rotate(&s, 1).unwrap();
        assert_eq!(r.points.0[0], Point { row: 0.0, col: 63.0 });
        assert_eq!(r.image.at3(0, 0, 63), 1.0);
        assert_eq!(r.image.sum(), 1.0);
    }

    #[test]
    fn non_square_quarter_turn_is_rejected() {
        let s = scene(8, 6, 1);
        assert!(rotate(&s, 1).is_err());
        assert!(rotate(&s, 3).is_err());
        assert!(rotate(&s, 2).is_ok());
        assert!(rotate(&s, 0).is_err());
    }
}
