//! Conversions between the engineering units used in configuration files and
//! the SI values used internally.

use std::f64::consts::PI;

pub fn dbm_to_w(dbm: f64) -> f64 {
    10f64.powf((dbm - 30.0) / 10.0)
}

pub fn w_to_dbm(w: f64) -> f64 {
    10.0 * w.log10() + 30.0
}

pub fn db_to_linear(db: f64) -> f64 {
    10f64.powf(db / 10.0)
}

pub fn linear_to_db(x: f64) -> f64 {
    10.0 * x.log10()
}

/// Density of a PPP whose mean Voronoi cell equals a disc of radius `radius_m`.
pub fn radius_to_density(radius_m: f64) -> f64 {
    1.0 / (PI * radius_m * radius_m)
}

pub fn density_to_radius(density: f64) -> f64 {
    (1.0 / (PI * density)).sqrt()
}

pub fn per_km2_to_per_m2(x: f64) -> f64 {
    x * 1e-6
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn reference_conversions() {
        assert!((dbm_to_w(30.0) - 1.0).abs() < 1e-15);
        assert!((dbm_to_w(43.0) - 19.952_623_149_688_8).abs() < 1e-12);
        assert!((w_to_dbm(130.0) - 51.139_433_523_068_4).abs() < 1e-12);
        assert!((radius_to_density(250.0) - 5.092_958_178_940_651e-6).abs() < 1e-20);
        assert!((density_to_radius(radius_to_density(123.0)) - 123.0).abs() < 1e-10);
    }
}
