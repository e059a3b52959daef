use crate::error::{Error, Result};
use crate::rng::{CoinStream, Purpose};

/// Split an edge state X ~ Ber(x) into independent Y ~ Ber(y), Z ~ Ber(z)
/// with X >= Y*Z. Uses the `CoupleThin` and `CoupleSplit` coins of `edge`.
pub fn couple_two_round(x: f64, y: f64, z: f64, state: bool, coins: &CoinStream, edge: usize) -> Result<(bool, bool)> {
    let u1 = coins.uniform(Purpose::CoupleThin, edge as u64);
    let u2 = coins.uniform(Purpose::CoupleSplit, edge as u64);
    couple_with(x, y, z, state, u1, u2)
}

/// Coupling driven by explicit uniforms `thin` and `split`.
pub fn couple_with(x: f64, y: f64, z: f64, state: bool, thin: f64, split: f64) -> Result<(bool, bool)> {
    if !(0.0..=1.0).contains(&y) || !(0.0..=1.0).contains(&z) || !(x > 0.0 && x <= 1.0) {
        return Err(Error::invalid(format!("coupling needs x in (0,1], y,z in [0,1]; got x={x}, y={y}, z={z}")));
    }
    let yz = y * z;
    if x < yz {
        return Err(Error::limit(format!("coupling impossible: x={x} < y*z={yz}")));
    }
    if state && thin < yz / x {
        return Ok((true, true));
    }
    if yz >= 1.0 {
        return Ok((false, false));
    }
    let a10 = (y - yz) / (1.0 - yz);
    let a01 = (z - yz) / (1.0 - yz);
    Ok(if split < a10 {
        (true, false)
    } else if split < a10 + a01 {
        (false, true)
    } else {
        (false, false)
    })
}
