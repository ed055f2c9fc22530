//! Network geometry and large-scale fading.
//!
//! APs sit on the perimeter of a square with perimeter `D`, equally spaced in
//! arclength, counterclockwise from the corner at the origin. Users are drawn
//! uniformly inside a smaller concentric square.

use rand::Rng;

use crate::config::NetworkConfig;
use crate::error::{Error, Result};

/// AP and user positions for one drop, planar coordinates in meters.
#[derive(Debug, Clone)]
pub struct Placement {
    pub ap_positions: Vec<[f64; 2]>,
    pub user_positions: Vec<[f64; 2]>,
}

/// Map an arclength along the square perimeter (side `side`, counterclockwise
/// from the origin corner) to a planar point.
fn perimeter_point(arclength: f64, side: f64) -> [f64; 2] {
    let t = arclength.rem_euclid(4.0 * side);
    if t < side {
        [t, 0.0]
    } else if t < 2.0 * side {
        [side, t - side]
    } else if t < 3.0 * side {
        [3.0 * side - t, side]
    } else {
        [0.0, 4.0 * side - t]
    }
}

/// Place `num_aps` APs equally spaced on the perimeter of the outer square.
pub fn place_aps(num_aps: usize, perimeter_m: f64) -> Result<Vec<[f64; 2]>> {
    if num_aps == 0 {
        return Err(Error::Config("need at least one AP".into()));
    }
    if perimeter_m <= 0.0 {
        return Err(Error::Config("perimeter must be positive".into()));
    }
    let side = perimeter_m / 4.0;
    let spacing = perimeter_m / num_aps as f64;
    Ok((0..num_aps)
        .map(|i| perimeter_point(i as f64 * spacing, side))
        .collect())
}

/// Draw `num_users` user positions uniformly inside the inner square.
pub fn place_users<R: Rng>(
    num_users: usize,
    config: &NetworkConfig,
    rng: &mut R,
) -> Result<Vec<[f64; 2]>> {
    if config.inner_perimeter_m >= config.perimeter_m {
        return Err(Error::Config(
            "inner perimeter must be smaller than the outer perimeter".into(),
        ));
    }
    let center = config.perimeter_m / 8.0;
    let half = config.inner_perimeter_m / 8.0;
    Ok((0..num_users)
        .map(|_| {
            let x = rng.gen_range(center - half..center + half);
            let y = rng.gen_range(center - half..center + half);
            [x, y]
        })
        .collect())
}

/// Linear large-scale fading coefficient from the urban-microcell path loss
/// -30.5 - 36.7 log10(d / 1 m) dB.
pub fn large_scale_fading(distance_m: f64) -> Result<f64> {
    if distance_m <= 0.0 {
        return Err(Error::Numeric(format!(
            "path loss undefined for distance {distance_m} m"
        )));
    }
    let beta_db = -30.5 - 36.7 * distance_m.log10();
    Ok(10f64.powf(beta_db / 10.0))
}

/// 3-D distance between a user and an AP, with the vertical offset folded in.
pub fn ap_user_distance(ap: [f64; 2], user: [f64; 2], height_m: f64) -> f64 {
    let dx = ap[0] - user[0];
    let dy = ap[1] - user[1];
    (dx * dx + dy * dy + height_m * height_m).sqrt()
}
