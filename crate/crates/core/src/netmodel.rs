//! Network model: system parameters, BS activity and load statistics, the
//! pilot-detection factor and the stationarity conditions of the EE.

use std::f64::consts::PI;
use std::fmt;

use crate::error::{domain, Result};
use crate::specfun::{log_gamma_pos, upsilon};
use crate::units::{db_to_linear, dbm_to_w, per_km2_to_per_m2, radius_to_density};

/// Shape parameter of the Gamma approximation of the normalized cell area.
pub const CELL_AREA_SHAPE: f64 = 3.5;

const SPEED_OF_LIGHT: f64 = 3e8;

/// Physical-layer and traffic parameters. All values are linear SI units.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SystemParams {
    /// Path-loss exponent, must exceed 2.
    pub beta: f64,
    /// Free-space path-loss constant at one metre.
    pub kappa: f64,
    pub bandwidth_hz: f64,
    /// Noise power spectral density in W/Hz.
    pub noise_psd: f64,
    /// Decoding threshold of the data channel.
    pub gamma_d: f64,
    /// Detection threshold of the pilot (cell-association) channel.
    pub gamma_a: f64,
    /// Shape parameter of the cell-area distribution.
    pub alpha: f64,
    /// MT density in MT/m².
    pub lambda_mt: f64,
}

impl SystemParams {
    /// Reference setup: 2.1 GHz carrier, 20 MHz, -174 dBm/Hz, β = 3.5,
    /// 5 dB thresholds and 121 MT/km².
    pub fn reference() -> Self {
        Self {
            beta: 3.5,
            kappa: kappa_for_carrier(2.1e9),
            bandwidth_hz: 20e6,
            noise_psd: dbm_to_w(-174.0),
            gamma_d: db_to_linear(5.0),
            gamma_a: db_to_linear(5.0),
            alpha: CELL_AREA_SHAPE,
            lambda_mt: per_km2_to_per_m2(121.0),
        }
    }

    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("kappa", self.kappa),
            ("bandwidth", self.bandwidth_hz),
            ("noise density", self.noise_psd),
            ("alpha", self.alpha),
            ("MT density", self.lambda_mt),
        ];
        for (name, v) in positive {
            if !(v > 0.0 && v.is_finite()) {
                return Err(domain(format!("{name} must be positive and finite, got {v}")));
            }
        }
        if !(self.beta > 2.0 && self.beta.is_finite()) {
            return Err(domain(format!("path-loss exponent must exceed 2, got {}", self.beta)));
        }
        for (name, v) in [("gamma_d", self.gamma_d), ("gamma_a", self.gamma_a)] {
            if !(v >= 0.0 && v.is_finite()) {
                return Err(domain(format!("{name} must be non-negative, got {v}")));
            }
        }
        Ok(())
    }

    /// Noise power over the whole band, in watts.
    pub fn noise_power(&self) -> f64 {
        self.bandwidth_hz * self.noise_psd
    }
}

/// `(4π f_c / c)²`.
pub fn kappa_for_carrier(fc_hz: f64) -> f64 {
    (4.0 * PI * fc_hz / SPEED_OF_LIGHT).powi(2)
}

/// Per-BS power consumption figures in watts.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PowerProfile {
    /// Nominal transmit power. Optimizers and sweeps pass their own value.
    pub p_tx_w: f64,
    /// Circuit power of a BS serving one MT.
    pub p_circ_w: f64,
    /// Consumption of a BS in idle mode.
    pub p_idle_w: f64,
}

impl PowerProfile {
    /// 43 dBm transmit, 51.14 dBm (about 130 W) circuit, 48.75 dBm (about 75 W) idle.
    pub fn reference() -> Self {
        Self {
            p_tx_w: dbm_to_w(43.0),
            p_circ_w: dbm_to_w(51.14),
            p_idle_w: dbm_to_w(48.75),
        }
    }

    pub fn validate(&self) -> Result<()> {
        for (name, v) in [("p_tx", self.p_tx_w), ("p_circ", self.p_circ_w), ("p_idle", self.p_idle_w)] {
            if !(v >= 0.0 && v.is_finite()) {
                return Err(domain(format!("{name} must be non-negative, got {v}")));
            }
        }
        Ok(())
    }

    /// Circuit power on top of the idle consumption.
    pub fn delta_p(&self) -> f64 {
        self.p_circ_w - self.p_idle_w
    }
}

/// How an active BS serves the MTs in its cell.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum LoadModel {
    /// One randomly chosen MT gets the whole band.
    SingleUser,
    /// Every MT is served with an equal share of the band.
    EqualShare,
}

impl LoadModel {
    pub const ALL: [LoadModel; 2] = [LoadModel::SingleUser, LoadModel::EqualShare];

    pub fn index(self) -> u8 {
        match self {
            LoadModel::SingleUser => 1,
            LoadModel::EqualShare => 2,
        }
    }

    pub fn from_index(i: u8) -> Option<Self> {
        match i {
            1 => Some(LoadModel::SingleUser),
            2 => Some(LoadModel::EqualShare),
            _ => None,
        }
    }
}

impl fmt::Display for LoadModel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "LM{}", self.index())
    }
}

/// A first and second derivative pair.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Derivs {
    pub first: f64,
    pub second: f64,
}

/// `(1 + x/α)^(-k)`, computed without loss for small `x`.
fn cell_pow(x: f64, alpha: f64, k: f64) -> f64 {
    (-k * (x / alpha).ln_1p()).exp()
}

/// `1 - (1 + x/α)^(-k)`.
fn one_minus_cell_pow(x: f64, alpha: f64, k: f64) -> f64 {
    -(-k * (x / alpha).ln_1p()).exp_m1()
}

/// Probability that a BS has at least one MT and transmits:
/// `1 - (1 + x/α)^(-α)` with `x = λ_MT/λ_BS`.
pub fn activity(ratio: f64, alpha: f64) -> f64 {
    one_minus_cell_pow(ratio, alpha, alpha)
}

/// Mean number of MTs per BS beyond the first one that an active BS serves,
/// zero for the single-user model and `x - activity(x)` otherwise.
pub fn surplus_load(ratio: f64, load: LoadModel, alpha: f64) -> f64 {
    match load {
        LoadModel::SingleUser => 0.0,
        LoadModel::EqualShare if ratio < 1e-3 => surplus_small(ratio, alpha),
        LoadModel::EqualShare => ratio - activity(ratio, alpha),
    }
}

/// `x - activity(x)` by series, avoiding the cancellation for small `x`.
fn surplus_small(x: f64, alpha: f64) -> f64 {
    let y = x / alpha;
    let z = alpha * y.ln_1p();
    // alpha * (y - ln(1+y)) and z - (1 - e^-z), both starting at the square.
    let mut a = 0.0;
    let mut yk = y;
    let mut zk = z;
    let mut fact = 1.0;
    let mut b = 0.0;
    for k in 2..12 {
        yk *= -y;
        zk *= -z;
        fact *= k as f64;
        a -= yk / k as f64;
        b -= zk / fact;
    }
    alpha * a + b
}

/// Derivatives of [`activity`] with respect to the BS density.
pub fn activity_dlambda(lambda_bs: f64, lambda_mt: f64, alpha: f64) -> Derivs {
    let x = lambda_mt / lambda_bs;
    let p1 = cell_pow(x, alpha, alpha + 1.0);
    let first = -lambda_mt / (lambda_bs * lambda_bs) * p1;
    let bracket = 2.0 - (1.0 + alpha) / alpha * x / (1.0 + x / alpha);
    let second = lambda_mt / lambda_bs.powi(3) * p1 * bracket;
    Derivs { first, second }
}

/// Derivatives of [`surplus_load`] with respect to the BS density.
pub fn surplus_dlambda(lambda_bs: f64, lambda_mt: f64, load: LoadModel, alpha: f64) -> Derivs {
    if load == LoadModel::SingleUser {
        return Derivs { first: 0.0, second: 0.0 };
    }
    let x = lambda_mt / lambda_bs;
    let q1 = one_minus_cell_pow(x, alpha, alpha + 1.0);
    let first = -lambda_mt / (lambda_bs * lambda_bs) * q1;
    let second = 2.0 * lambda_mt / lambda_bs.powi(3) * q1
        + (1.0 + alpha) / alpha * lambda_mt * lambda_mt / lambda_bs.powi(4) * cell_pow(x, alpha, alpha + 2.0);
    Derivs { first, second }
}

/// Probability mass function of the number of other MTs in the cell of a
/// typical MT, for MT-to-BS density ratio `ratio`.
pub fn cell_load_pmf(u: u32, ratio: f64, alpha: f64) -> f64 {
    let uf = u as f64;
    let log_p = (alpha + 1.0) * alpha.ln() + log_gamma_pos(uf + alpha + 1.0)
        - log_gamma_pos(alpha + 1.0)
        - log_gamma_pos(uf + 1.0)
        + if u == 0 { 0.0 } else { uf * ratio.ln() }
        - (uf + alpha + 1.0) * (alpha + ratio).ln();
    log_p.exp()
}

/// Probabilities that a BS is transmitting and idle.
pub fn tx_idle_probabilities(ratio: f64, alpha: f64) -> (f64, f64) {
    let tx = activity(ratio, alpha);
    (tx, cell_pow(ratio, alpha, alpha))
}

/// Parameters together with the quantities derived from them once.
#[derive(Debug, Clone, Copy)]
pub struct Network {
    pub params: SystemParams,
    /// Interference functional at the data threshold.
    pub upsilon: f64,
    /// `κ σ² γ_A`: transmit power needed to detect a pilot at one metre.
    pub eta: f64,
}

impl Network {
    pub fn new(params: SystemParams) -> Result<Self> {
        params.validate()?;
        Ok(Self {
            params,
            upsilon: upsilon(params.beta, params.gamma_d)?,
            eta: params.kappa * params.noise_power() * params.gamma_a,
        })
    }

    pub fn ratio(&self, lambda_bs: f64) -> f64 {
        self.params.lambda_mt / lambda_bs
    }

    pub fn activity(&self, lambda_bs: f64) -> f64 {
        activity(self.ratio(lambda_bs), self.params.alpha)
    }

    pub fn surplus_load(&self, lambda_bs: f64, load: LoadModel) -> f64 {
        surplus_load(self.ratio(lambda_bs), load, self.params.alpha)
    }

    /// Exponent `s` of the detection factor `1 - e^(-s)`.
    fn detection_exponent(&self, lambda_bs: f64, p_tx: f64) -> f64 {
        let l = self.activity(lambda_bs);
        PI * lambda_bs * (p_tx / self.eta).powf(2.0 / self.params.beta) * (1.0 + self.upsilon * l)
    }

    /// Probability that the nearest BS is detectable on the pilot channel,
    /// weighted by the interference-limited coverage law.
    pub fn detection(&self, lambda_bs: f64, p_tx: f64) -> Result<f64> {
        check_point(lambda_bs, p_tx)?;
        if self.params.gamma_a == 0.0 {
            return Ok(1.0);
        }
        if lambda_bs == 0.0 || p_tx == 0.0 {
            return Ok(0.0);
        }
        Ok(-(-self.detection_exponent(lambda_bs, p_tx)).exp_m1())
    }

    /// Derivatives of [`Network::detection`] with respect to transmit power.
    pub fn detection_dp(&self, lambda_bs: f64, p_tx: f64) -> Result<Derivs> {
        check_point(lambda_bs, p_tx)?;
        if self.params.gamma_a == 0.0 {
            return Ok(Derivs { first: 0.0, second: 0.0 });
        }
        if lambda_bs == 0.0 || p_tx == 0.0 {
            return Err(domain("power derivatives need positive density and power"));
        }
        let d = 2.0 / self.params.beta;
        let s = self.detection_exponent(lambda_bs, p_tx);
        let e = (-s).exp();
        Ok(Derivs {
            first: d * s / p_tx * e,
            second: d * e / (p_tx * p_tx) * ((d - 1.0) * s - d * s * s),
        })
    }

    /// First derivative of [`Network::detection`] with respect to BS density.
    pub fn detection_dlambda(&self, lambda_bs: f64, p_tx: f64) -> Result<f64> {
        check_point(lambda_bs, p_tx)?;
        if self.params.gamma_a == 0.0 {
            return Ok(0.0);
        }
        if lambda_bs == 0.0 {
            return Err(domain("density derivative needs positive density"));
        }
        let s = self.detection_exponent(lambda_bs, p_tx);
        Ok(self.detection_rate_dlambda(lambda_bs, p_tx) * (-s).exp())
    }

    /// `ds/dλ` for the exponent of the detection factor.
    fn detection_rate_dlambda(&self, lambda_bs: f64, p_tx: f64) -> f64 {
        let l = self.activity(lambda_bs);
        let dl = activity_dlambda(lambda_bs, self.params.lambda_mt, self.params.alpha).first;
        let ups = self.upsilon;
        PI * (p_tx / self.eta).powf(2.0 / self.params.beta) * (1.0 + ups * l + ups * lambda_bs * dl)
    }

    /// Per-BS grid consumption divided by nothing: `L(P + ΔP) + P_idle + P_circ M`.
    pub fn consumption_per_bs(&self, lambda_bs: f64, p_tx: f64, power: &PowerProfile, load: LoadModel) -> f64 {
        let l = self.activity(lambda_bs);
        let m = self.surplus_load(lambda_bs, load);
        l * (p_tx + power.delta_p()) + power.p_idle_w + power.p_circ_w * m
    }

    /// Stationarity gap in transmit power, in watts.
    ///
    /// Positive where the EE still increases with `p_tx` and negative past its
    /// maximizer. It is the idle power minus the power-side threshold function,
    /// so the EE-optimal power is its unique root.
    pub fn stationary_gap_power(&self, p_tx: f64, lambda_bs: f64, power: &PowerProfile, load: LoadModel) -> Result<f64> {
        check_point(lambda_bs, p_tx)?;
        if lambda_bs == 0.0 || p_tx == 0.0 {
            return Err(domain("stationary gap needs positive density and power"));
        }
        if self.params.gamma_a == 0.0 {
            return Ok(f64::NEG_INFINITY);
        }
        let l = self.activity(lambda_bs);
        let m = self.surplus_load(lambda_bs, load);
        let s = self.detection_exponent(lambda_bs, p_tx);
        // Q / Q' = P (β/2) (e^s - 1) / s.
        let ratio = p_tx * self.params.beta / 2.0 * exp_m1_over(s);
        let threshold = l * (ratio - p_tx - power.delta_p()) - power.p_circ_w * m;
        Ok(power.p_idle_w - threshold)
    }

    /// Stationarity gap in BS density, in watts.
    ///
    /// Its sign is the sign of the EE slope in `lambda_bs`, and the
    /// EE-optimal density is its unique root.
    pub fn stationary_gap_density(&self, p_tx: f64, lambda_bs: f64, power: &PowerProfile, load: LoadModel) -> Result<f64> {
        check_point(lambda_bs, p_tx)?;
        if lambda_bs == 0.0 || p_tx == 0.0 {
            return Err(domain("stationary gap needs positive density and power"));
        }
        let a = self.params.alpha;
        let ups = self.upsilon;
        let l = self.activity(lambda_bs);
        let m = self.surplus_load(lambda_bs, load);
        let dl = activity_dlambda(lambda_bs, self.params.lambda_mt, a).first;
        let dm = surplus_dlambda(lambda_bs, self.params.lambda_mt, load, a).first;
        let pc = power.p_circ_w;
        let tx = p_tx + power.delta_p();
        // Q'/Q in density. Zero when detection is guaranteed.
        let log_slope = if self.params.gamma_a == 0.0 {
            0.0
        } else {
            let s = self.detection_exponent(lambda_bs, p_tx);
            self.detection_rate_dlambda(lambda_bs, p_tx) / s.exp_m1()
        };
        let per_bs = l * tx + power.p_idle_w + pc * m;
        let threshold = pc / dl * (l * dm - dl * m) + ups * l * l * tx + ups * pc * l * l * dm / dl
            - l * log_slope / dl * (1.0 + ups * l) * per_bs;
        Ok(threshold - power.p_idle_w)
    }
}

/// `(e^s - 1) / s` with the removable singularity at zero.
fn exp_m1_over(s: f64) -> f64 {
    if s == 0.0 {
        1.0
    } else {
        s.exp_m1() / s
    }
}

fn check_point(lambda_bs: f64, p_tx: f64) -> Result<()> {
    if !(lambda_bs >= 0.0 && lambda_bs.is_finite()) {
        return Err(domain(format!("BS density must be non-negative and finite, got {lambda_bs}")));
    }
    if !(p_tx >= 0.0 && p_tx.is_finite()) {
        return Err(domain(format!("transmit power must be non-negative and finite, got {p_tx}")));
    }
    Ok(())
}

/// BS density of the reference 250 m cell radius.
pub fn reference_lambda_bs() -> f64 {
    radius_to_density(250.0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use testkit::{central_diff, rel_diff};

    fn net() -> Network {
        Network::new(SystemParams::reference()).unwrap()
    }

    #[test]
    fn reference_derived_quantities() {
        let n = net();
        assert!((n.params.kappa - 7_737.769_850_454_057).abs() < 1e-6);
        assert!(rel_diff(n.params.noise_power(), 7.962_143_411_069_971e-14) < 1e-12);
        assert!(rel_diff(n.eta, 1.948_255_019_070_279e-9) < 1e-9, "{}", n.eta);
        let x = n.ratio(reference_lambda_bs());
        assert!((x - 23.758_294_442_772_8).abs() < 1e-9, "{x}");
    }

    #[test]
    fn activity_limits() {
        assert_eq!(activity(0.0, 3.5), 0.0);
        assert!((activity(1e9, 3.5) - 1.0).abs() < 1e-15);
        // Small-ratio slope is one.
        assert!(rel_diff(activity(1e-9, 3.5), 1e-9) < 1e-8);
    }

    #[test]
    fn surplus_series_joins_direct_form() {
        for &x in &[1e-3, 9.99e-4] {
            let direct = x - activity(x, 3.5);
            assert!(rel_diff(surplus_small(x, 3.5), direct) < 1e-9);
        }
        // Leading term (α+1) x² / (2α).
        let x = 1e-7;
        assert!(rel_diff(surplus_load(x, LoadModel::EqualShare, 3.5), 4.5 * x * x / 7.0) < 1e-6);
    }

    #[test]
    fn derivative_bracket_changes_sign_at_known_ratio() {
        // 2 - (1+α)/α · x/(1+x/α) vanishes at x = 2α/(α-1) = 2.8 for α = 3.5.
        let lm = 1.0;
        let below = activity_dlambda(lm / 2.79, lm, 3.5).second;
        let above = activity_dlambda(lm / 2.81, lm, 3.5).second;
        assert!(below > 0.0 && above < 0.0);
    }

    #[test]
    fn pmf_identity_and_normalization() {
        for &r in &[0.5, 1.0, 23.76] {
            let mut total = 0.0;
            let mut weighted = 0.0;
            for u in 0..5000 {
                let p = cell_load_pmf(u, r, 3.5);
                total += p;
                weighted += p / (u as f64 + 1.0);
            }
            assert!((total - 1.0).abs() < 1e-10);
            assert!((weighted - activity(r, 3.5) / r).abs() < 1e-8);
        }
    }

    #[test]
    fn detection_limits() {
        let n = net();
        let lam = reference_lambda_bs();
        assert_eq!(n.detection(lam, 0.0).unwrap(), 0.0);
        assert_eq!(n.detection(0.0, 20.0).unwrap(), 0.0);
        assert!((n.detection(lam, 1e6).unwrap() - 1.0).abs() < 1e-15);
        let mut p = SystemParams::reference();
        p.gamma_a = 0.0;
        let n0 = Network::new(p).unwrap();
        assert_eq!(n0.detection(lam, 1e-6).unwrap(), 1.0);
        assert!(n.detection(-1.0, 1.0).is_err());
    }

    #[test]
    fn single_user_surplus_is_zero() {
        assert_eq!(surplus_load(23.0, LoadModel::SingleUser, 3.5), 0.0);
        let d = surplus_dlambda(1e-5, 1e-4, LoadModel::SingleUser, 3.5);
        assert_eq!((d.first, d.second), (0.0, 0.0));
    }

    fn ee_closed(n: &Network, p: f64, lam: f64, power: &PowerProfile, load: LoadModel) -> f64 {
        let l = n.activity(lam);
        l * n.detection(lam, p).unwrap() / ((1.0 + n.upsilon * l) * n.consumption_per_bs(lam, p, power, load))
    }

    #[test]
    fn gaps_are_scaled_ee_slopes() {
        let n = net();
        let power = PowerProfile::reference();
        for load in LoadModel::ALL {
            for &(p, r) in &[(0.5, 250.0), (20.0, 250.0), (3.0, 900.0), (100.0, 150.0)] {
                let lam = radius_to_density(r);
                let ee = ee_closed(&n, p, lam, &power, load);
                let q = n.detection(lam, p).unwrap();
                let qd = n.detection_dp(lam, p).unwrap().first;
                let d = n.consumption_per_bs(lam, p, &power, load);
                let slope_p = central_diff(|pp| ee_closed(&n, pp, lam, &power, load), p, p * 1e-4);
                let gap_p = n.stationary_gap_power(p, lam, &power, load).unwrap();
                let predicted = ee * qd / (d * q) * gap_p;
                assert!(rel_diff(slope_p, predicted) < 1e-7, "{load} {p} {r}: {slope_p} {predicted}");

                let l = n.activity(lam);
                let dl = activity_dlambda(lam, n.params.lambda_mt, n.params.alpha).first;
                let slope_l = central_diff(|ll| ee_closed(&n, p, ll, &power, load), lam, lam * 1e-4);
                let gap_l = n.stationary_gap_density(p, lam, &power, load).unwrap();
                let predicted = ee * gap_l * (-dl) / (d * l * (1.0 + n.upsilon * l));
                assert!(rel_diff(slope_l, predicted) < 1e-7, "{load} {p} {r}: {slope_l} {predicted}");
            }
        }
    }

    proptest! {
        #[test]
        fn activity_derivatives_match_differences(lm in 1e-6f64..1e-3, ratio in 0.05f64..200.0) {
            let lam = lm / ratio;
            let d = activity_dlambda(lam, lm, 3.5);
            let h = lam * 1e-4;
            let fd1 = central_diff(|l| activity(lm / l, 3.5), lam, h);
            let fd2 = central_diff(|l| activity_dlambda(l, lm, 3.5).first, lam, h);
            prop_assert!(rel_diff(d.first, fd1) < 1e-6);
            // The second derivative vanishes at ratio 2.8; compare on the first-derivative scale there.
            prop_assert!((d.second - fd2).abs() < 1e-6 * d.second.abs().max(1e-3 * d.first.abs() / lam));
        }

        #[test]
        fn surplus_derivatives_match_differences(lm in 1e-6f64..1e-3, ratio in 0.05f64..200.0) {
            let lam = lm / ratio;
            let load = LoadModel::EqualShare;
            let d = surplus_dlambda(lam, lm, load, 3.5);
            let h = lam * 1e-4;
            let fd1 = central_diff(|l| surplus_load(lm / l, load, 3.5), lam, h);
            let fd2 = central_diff(|l| surplus_dlambda(l, lm, load, 3.5).first, lam, h);
            prop_assert!(rel_diff(d.first, fd1) < 1e-6);
            prop_assert!(rel_diff(d.second, fd2) < 1e-6);
        }

        #[test]
        fn activity_and_surplus_are_monotone(r1 in 1e-4f64..1e4, k in 1.001f64..10.0) {
            let r2 = r1 * k;
            prop_assert!(activity(r2, 3.5) > activity(r1, 3.5));
            let m1 = surplus_load(r1, LoadModel::EqualShare, 3.5);
            let m2 = surplus_load(r2, LoadModel::EqualShare, 3.5);
            prop_assert!(m1 >= 0.0 && m2 > m1);
            let (tx, idle) = tx_idle_probabilities(r1, 3.5);
            prop_assert!((tx + idle - 1.0).abs() < 1e-15);
        }
    }
}
