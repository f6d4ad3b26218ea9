use super::EnvConfig;

/// Width of the screen region visible in a pixel observation, centered on gaze.
pub const VIEW_SPAN: f64 = 1.0;

const SUBSAMPLES: usize = 4;
const CROSS_HALF_WIDTH: f64 = 0.02;
const CUE_HALF_SIZE: f64 = 0.05;
/// Cue patches sit at fixed screen locations, Ready left of fixation and
/// Set below it, sharing the cue channel.
const READY_OFFSET: [f64; 2] = [-0.2, 0.0];
const SET_OFFSET: [f64; 2] = [0.0, -0.2];

/// Which stimuli are on screen.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct Visibility {
    pub fixation: bool,
    pub target: bool,
    pub ready: bool,
    pub set: bool,
}

/// Axis-aligned region painted into one channel.
#[derive(Clone, Copy, Debug)]
pub(crate) enum Shape {
    Rect { center: [f64; 2], half: [f64; 2] },
    Disc { center: [f64; 2], radius: f64 },
}

impl Shape {
    fn contains(&self, p: [f64; 2]) -> bool {
        match *self {
            Shape::Rect { center, half } => {
                (p[0] - center[0]).abs() <= half[0] && (p[1] - center[1]).abs() <= half[1]
            }
            Shape::Disc { center, radius } => {
                let dx = p[0] - center[0];
                let dy = p[1] - center[1];
                dx * dx + dy * dy <= radius * radius
            }
        }
    }
}

/// Shapes per channel (0 = fixation cross, 1 = target, 2 = cues).
pub(crate) fn scene(config: &EnvConfig, visible: Visibility) -> [Vec<Shape>; 3] {
    let mut channels: [Vec<Shape>; 3] = Default::default();
    let f = config.fixation_pos;
    if visible.fixation {
        let arm = config.fixation_radius;
        channels[0].push(Shape::Rect {
            center: f,
            half: [arm, CROSS_HALF_WIDTH],
        });
        channels[0].push(Shape::Rect {
            center: f,
            half: [CROSS_HALF_WIDTH, arm],
        });
    }
    if visible.target {
        channels[1].push(Shape::Disc {
            center: config.target_pos,
            radius: config.target_radius,
        });
    }
    for (on, offset) in [(visible.ready, READY_OFFSET), (visible.set, SET_OFFSET)] {
        if on {
            channels[2].push(Shape::Rect {
                center: [f[0] + offset[0], f[1] + offset[1]],
                half: [CUE_HALF_SIZE, CUE_HALF_SIZE],
            });
        }
    }
    channels
}

/// Renders a gaze-centered `3 x size x size` grid, channel-major then
/// row-major with row 0 at the top of the view. Intensity is the covered
/// fraction of each cell estimated on a 4x4 subsample lattice.
pub(crate) fn render_with(config: &EnvConfig, gaze: [f64; 2], visible: Visibility) -> Vec<f64> {
    let size = config.pixel_size;
    let pitch = VIEW_SPAN / size as f64;
    let origin = [gaze[0] - VIEW_SPAN / 2.0, gaze[1] + VIEW_SPAN / 2.0];
    let channels = scene(config, visible);
    let mut out = vec![0.0; 3 * size * size];
    let weight = 1.0 / (SUBSAMPLES * SUBSAMPLES) as f64;
    for (c, shapes) in channels.iter().enumerate() {
        if shapes.is_empty() {
            continue;
        }
        for row in 0..size {
            for col in 0..size {
                let mut covered = 0usize;
                for sy in 0..SUBSAMPLES {
                    for sx in 0..SUBSAMPLES {
                        let p = [
                            origin[0] + pitch * (col as f64 + (sx as f64 + 0.5) / SUBSAMPLES as f64),
                            origin[1] - pitch * (row as f64 + (sy as f64 + 0.5) / SUBSAMPLES as f64),
                        ];
                        if shapes.iter().any(|s| s.contains(p)) {
                            covered += 1;
                        }
                    }
                }
                out[(c * size + row) * size + col] = covered as f64 * weight;
            }
        }
    }
    out
}

/// Pixel observation for an arbitrary gaze and visibility pattern.
pub fn render_pixels(config: &EnvConfig, gaze: [f64; 2], visible: Visibility) -> Vec<f64> {
    render_with(config, gaze, visible)
}
