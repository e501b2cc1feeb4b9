//! Qualitative behaviour of the power and density optima across regimes.

use ppp_energy::metrics::energy_efficiency;
use ppp_energy::optimizer::{
    log_grid, optimal_density, optimal_power, shift_sign_density, shift_sign_power, OptimizationBounds,
};
use ppp_energy::units::{dbm_to_w, per_km2_to_per_m2, radius_to_density};
use ppp_energy::{LoadModel, Network, PowerProfile, SystemParams};

fn sign_changes(values: &[f64]) -> usize {
    let signs: Vec<f64> = values
        .windows(2)
        .map(|w| w[1] - w[0])
        .filter(|d| d.abs() > 1e-9 * values.iter().fold(0.0f64, |m, v| m.max(v.abs())))
        .map(f64::signum)
        .collect();
    signs.windows(2).filter(|s| s[0] != s[1]).count()
}

#[test]
fn steep_sparse_case_optimal_power_is_not_monotone_in_cell_radius() {
    let params = SystemParams { beta: 6.5, lambda_mt: per_km2_to_per_m2(21.0), ..SystemParams::reference() };
    let net = Network::new(params).unwrap();
    let power = PowerProfile::reference();
    let bounds = OptimizationBounds::default();
    for load in LoadModel::ALL {
        let p_opt: Vec<f64> = log_grid(10.0, 2000.0, 400)
            .into_iter()
            .map(|r| optimal_power(radius_to_density(r), &net, &power, load, &bounds).unwrap().p_opt_w)
            .collect();
        assert!(sign_changes(&p_opt) >= 2, "{load}: optimal power changes direction {} times", sign_changes(&p_opt));
    }
}

#[test]
fn reference_case_optimal_density_is_not_monotone_in_power() {
    let net = Network::new(SystemParams::reference()).unwrap();
    let power = PowerProfile::reference();
    let bounds = OptimizationBounds::default();
    let lam_opt: Vec<f64> = (0..=80)
        .map(|k| dbm_to_w(-20.0 + k as f64))
        .map(|p| optimal_density(p, &net, &power, LoadModel::SingleUser, &bounds).unwrap().lambda_opt)
        .collect();
    assert!(sign_changes(&lam_opt) >= 1);
}

#[test]
fn shift_signs_predict_the_move_of_the_optimum() {
    let net = Network::new(SystemParams { beta: 6.5, lambda_mt: 21e-6, ..SystemParams::reference() }).unwrap();
    let power = PowerProfile::reference();
    let bounds = OptimizationBounds { p_min_w: 1e-9, p_max_w: 1e9, lambda_min: 1e-12, lambda_max: 1e-1, ..OptimizationBounds::default() };
    let radii = log_grid(10.0, 2000.0, 60);
    for load in LoadModel::ALL {
        for w in radii.windows(2) {
            let (old, new) = (radius_to_density(w[0]), radius_to_density(w[1]));
            let p_old = optimal_power(old, &net, &power, load, &bounds).unwrap().p_opt_w;
            let p_new = optimal_power(new, &net, &power, load, &bounds).unwrap().p_opt_w;
            let predicted = shift_sign_power(p_old, new, &net, &power, load).unwrap();
            if (p_new / p_old - 1.0).abs() > 1e-6 {
                assert_eq!(predicted, p_new.partial_cmp(&p_old).unwrap(), "{load} R {}->{}", w[0], w[1]);
            }
        }
        let powers: Vec<f64> = (0..40).map(|k| dbm_to_w(-20.0 + 2.0 * k as f64)).collect();
        for w in powers.windows(2) {
            let l_old = optimal_density(w[0], &net, &power, load, &bounds).unwrap().lambda_opt;
            let l_new = optimal_density(w[1], &net, &power, load, &bounds).unwrap().lambda_opt;
            let predicted = shift_sign_density(l_old, w[1], &net, &power, load).unwrap();
            if (l_new / l_old - 1.0).abs() > 1e-6 {
                assert_eq!(predicted, l_new.partial_cmp(&l_old).unwrap(), "{load} P {}->{}", w[0], w[1]);
            }
        }
    }
}

#[test]
fn optima_beat_their_neighbours() {
    let net = Network::new(SystemParams::reference()).unwrap();
    let power = PowerProfile::reference();
    let bounds = OptimizationBounds::default();
    for load in LoadModel::ALL {
        for r in [30.0, 100.0, 300.0, 1000.0] {
            let lam = radius_to_density(r);
            let opt = optimal_power(lam, &net, &power, load, &bounds).unwrap();
            for f in [0.99, 1.01] {
                let p = (opt.p_opt_w * f).clamp(bounds.p_min_w, bounds.p_max_w);
                assert!(energy_efficiency(p, lam, &net, &power, load).unwrap() <= opt.ee_opt * (1.0 + 1e-12));
            }
        }
        for dbm in [0.0, 20.0, 40.0] {
            let p = dbm_to_w(dbm);
            let opt = optimal_density(p, &net, &power, load, &bounds).unwrap();
            for f in [0.99, 1.01] {
                let lam = (opt.lambda_opt * f).clamp(bounds.lambda_min, bounds.lambda_max);
                assert!(energy_efficiency(p, lam, &net, &power, load).unwrap() <= opt.ee_opt * (1.0 + 1e-12));
            }
        }
    }
}
