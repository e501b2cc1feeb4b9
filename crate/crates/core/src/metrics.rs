//! Closed-form network metrics: coverage, potential spectral efficiency,
//! grid power and energy efficiency.

use crate::error::{Error, Result};
use crate::netmodel::{LoadModel, Network, PowerProfile};

/// Metrics of one operating point for one load model.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NetworkMetrics {
    pub coverage: f64,
    /// Potential spectral efficiency in bit/s/m².
    pub pse: f64,
    /// Grid power per unit area in W/m².
    pub power_grid: f64,
    /// Energy efficiency in bit/J.
    pub energy_efficiency: f64,
}

/// Coverage probability of the typical MT.
pub fn coverage(p_tx: f64, lambda_bs: f64, net: &Network) -> Result<f64> {
    let q = net.detection(lambda_bs, p_tx)?;
    if q == 0.0 {
        return Ok(0.0);
    }
    Ok(q / (1.0 + net.upsilon * net.activity(lambda_bs)))
}

/// Rate per unit bandwidth of a successfully decoded transmission.
fn rate(net: &Network) -> f64 {
    net.params.bandwidth_hz * (1.0 + net.params.gamma_d).log2()
}

/// Potential spectral efficiency in bit/s/m². Identical for both load models.
pub fn pse(p_tx: f64, lambda_bs: f64, net: &Network) -> Result<f64> {
    let cov = coverage(p_tx, lambda_bs, net)?;
    Ok(rate(net) * lambda_bs * net.activity(lambda_bs) * cov)
}

/// PSE of a fully loaded, noise-free network without detection constraint.
pub fn pse_baseline(lambda_bs: f64, net: &Network) -> f64 {
    lambda_bs * rate(net) / (1.0 + net.upsilon)
}

/// Grid power per unit area in W/m².
pub fn power_grid(p_tx: f64, lambda_bs: f64, net: &Network, power: &PowerProfile, load: LoadModel) -> Result<f64> {
    net.detection(lambda_bs, p_tx)?;
    let l = net.activity(lambda_bs);
    let idle = lambda_bs * power.p_idle_w * (1.0 - l);
    Ok(match load {
        LoadModel::SingleUser => lambda_bs * (p_tx + power.p_circ_w) * l + idle,
        LoadModel::EqualShare => lambda_bs * p_tx * l + net.params.lambda_mt * power.p_circ_w + idle,
    })
}

/// Energy efficiency in bit/J: PSE over grid power.
///
/// A network without BSs or without transmit power delivers nothing and is
/// reported with zero efficiency.
pub fn energy_efficiency(p_tx: f64, lambda_bs: f64, net: &Network, power: &PowerProfile, load: LoadModel) -> Result<f64> {
    let num = pse(p_tx, lambda_bs, net)?;
    if lambda_bs == 0.0 || p_tx == 0.0 {
        return Ok(0.0);
    }
    let den = power_grid(p_tx, lambda_bs, net, power, load)?;
    if den <= 0.0 {
        return Err(Error::DegenerateNetwork);
    }
    Ok(num / den)
}

pub fn evaluate(p_tx: f64, lambda_bs: f64, net: &Network, power: &PowerProfile, load: LoadModel) -> Result<NetworkMetrics> {
    Ok(NetworkMetrics {
        coverage: coverage(p_tx, lambda_bs, net)?,
        pse: pse(p_tx, lambda_bs, net)?,
        power_grid: power_grid(p_tx, lambda_bs, net, power, load)?,
        energy_efficiency: energy_efficiency(p_tx, lambda_bs, net, power, load)?,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::netmodel::SystemParams;
    use crate::units::{dbm_to_w, radius_to_density};
    use proptest::prelude::*;
    use testkit::rel_diff;

    fn setup() -> (Network, PowerProfile, f64) {
        (
            Network::new(SystemParams::reference()).unwrap(),
            PowerProfile::reference(),
            radius_to_density(250.0),
        )
    }

    /// EE written out in full with the density cancelled.
    fn ee_expanded(p: f64, lam: f64, net: &Network, power: &PowerProfile, load: LoadModel) -> f64 {
        let prm = &net.params;
        let x = prm.lambda_mt / lam;
        let l = 1.0 - (1.0 + x / prm.alpha).powf(-prm.alpha);
        let m = match load {
            LoadModel::SingleUser => 0.0,
            LoadModel::EqualShare => x - l,
        };
        let eta = prm.kappa * prm.bandwidth_hz * prm.noise_psd * prm.gamma_a;
        let q = -(-std::f64::consts::PI * lam * (p / eta).powf(2.0 / prm.beta) * (1.0 + net.upsilon * l)).exp_m1();
        let num = prm.bandwidth_hz * (1.0 + prm.gamma_d).log2() * l * q;
        let den = (1.0 + net.upsilon * l)
            * (l * (p + power.p_circ_w - power.p_idle_w) + power.p_idle_w + m * power.p_circ_w);
        num / den
    }

    #[test]
    fn reference_point_values() {
        let (net, power, lam) = setup();
        let p = dbm_to_w(43.0);
        let m1 = evaluate(p, lam, &net, &power, LoadModel::SingleUser).unwrap();
        let m2 = evaluate(p, lam, &net, &power, LoadModel::EqualShare).unwrap();
        // Independent recomputation from the raw formulas.
        for (m, load) in [(m1, LoadModel::SingleUser), (m2, LoadModel::EqualShare)] {
            assert!(rel_diff(m.energy_efficiency, ee_expanded(p, lam, &net, &power, load)) < 1e-12);
        }
        assert_eq!(m1.pse, m2.pse);
        assert!(m2.power_grid > m1.power_grid);
        assert!((m1.coverage - 0.273_977).abs() < 5e-6, "{}", m1.coverage);
    }

    #[test]
    fn zero_limits() {
        let (net, power, lam) = setup();
        for load in LoadModel::ALL {
            assert_eq!(energy_efficiency(0.0, lam, &net, &power, load).unwrap(), 0.0);
            assert_eq!(energy_efficiency(1.0, 0.0, &net, &power, load).unwrap(), 0.0);
        }
        assert_eq!(pse(0.0, lam, &net).unwrap(), 0.0);
    }

    #[test]
    fn zero_detection_threshold_pse() {
        let mut prm = SystemParams::reference();
        prm.gamma_a = 0.0;
        let net = Network::new(prm).unwrap();
        let rate = prm.bandwidth_hz * (1.0 + prm.gamma_d).log2();
        for &r in &[50.0, 250.0, 2000.0] {
            let lam = radius_to_density(r);
            let l = 1.0 - (1.0 + prm.lambda_mt / lam / prm.alpha).powf(-prm.alpha);
            let exact = rate * lam * l / (1.0 + net.upsilon * l);
            assert!(rel_diff(pse(1.0, lam, &net).unwrap(), exact) < 1e-12);
        }
    }

    #[test]
    fn full_load_approaches_baseline() {
        let mut prm = SystemParams::reference();
        prm.gamma_a = 0.0;
        let net = Network::new(prm).unwrap();
        let lam = prm.lambda_mt / 1e3;
        let ratio = pse(1.0, lam, &net).unwrap() / pse_baseline(lam, &net);
        assert!((ratio - 1.0).abs() <= 1e-3);
    }

    proptest! {
        #[test]
        fn ee_paths_agree(pdbm in -20.0f64..60.0, r in 10.0f64..3000.0, beta in 2.5f64..6.5, gdb in -5.0f64..15.0) {
            let mut prm = SystemParams::reference();
            prm.beta = beta;
            prm.gamma_d = 10f64.powf(gdb / 10.0);
            prm.gamma_a = prm.gamma_d;
            let net = Network::new(prm).unwrap();
            let power = PowerProfile::reference();
            let (p, lam) = (dbm_to_w(pdbm), radius_to_density(r));
            for load in LoadModel::ALL {
                let ee = energy_efficiency(p, lam, &net, &power, load).unwrap();
                let alt = ee_expanded(p, lam, &net, &power, load);
                prop_assert!(rel_diff(ee, alt) < 1e-12, "{ee} vs {alt}");
            }
        }

        #[test]
        fn load_model_ordering(pdbm in -20.0f64..60.0, r in 10.0f64..3000.0) {
            let (net, power, _) = setup();
            let (p, lam) = (dbm_to_w(pdbm), radius_to_density(r));
            let g1 = power_grid(p, lam, &net, &power, LoadModel::SingleUser).unwrap();
            let g2 = power_grid(p, lam, &net, &power, LoadModel::EqualShare).unwrap();
            prop_assert!(g2 >= g1);
            let e1 = energy_efficiency(p, lam, &net, &power, LoadModel::SingleUser).unwrap();
            let e2 = energy_efficiency(p, lam, &net, &power, LoadModel::EqualShare).unwrap();
            prop_assert!(e1 >= e2);
            let cov = coverage(p, lam, &net).unwrap();
            prop_assert!((0.0..=1.0).contains(&cov));
        }
    }
}
