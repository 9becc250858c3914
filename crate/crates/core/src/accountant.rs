//! Rényi-divergence privacy accountant for the subsampled Gaussian mechanism.
//!
//! Each step with sampling ratio `q = B/n` and noise variance `s2` costs at most
//! `7 q^2 eta / s2` at order `eta`, provided `eta <= (s2 / 2) ln(n/B)` and
//! `q < 1/10`. Costs add across steps, and a composed total converts to
//! `(eps, delta)` through `eps = total(eta) + ln(1/delta) / (eta - 1)`,
//! minimized over the admissible orders.

use std::fmt::Write as _;

use crate::error::{config, Error, Result};
use crate::noise::{NoiseSchedule, ScheduleMode};

/// Sampling ratio at or above which the per-step bound does not apply.
pub const MAX_SAMPLING_RATIO: f64 = 0.1;
/// Largest order on the default grid.
pub const DEFAULT_MAX_ORDER: u32 = 2000;
/// Default ceiling for the implied constant in `eps <= C1 B^2 K / n^2`.
pub const DEFAULT_C1_CEILING: f64 = 314.0;

const RENYI_CONSTANT: f64 = 7.0;
const RECORD_HEADER: &str = "# d2p2-ledger v1";

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MechanismParams {
    pub n: u64,
    pub batch: u64,
    pub sigma_eps: f64,
    pub mode: ScheduleMode,
    pub delta: f64,
}

impl MechanismParams {
    pub fn new(n: u64, batch: u64, sigma_eps: f64, mode: ScheduleMode, delta: f64) -> Result<Self> {
        let p = Self { n, batch, sigma_eps, mode, delta };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        if self.batch == 0 || self.batch > self.n {
            return config(format!("batch size {} must be in 1..={}", self.batch, self.n));
        }
        if self.sampling_ratio() >= MAX_SAMPLING_RATIO {
            return config(format!(
                "sampling ratio B/n = {}/{} = {:.4} must be below {MAX_SAMPLING_RATIO}",
                self.batch,
                self.n,
                self.sampling_ratio()
            ));
        }
        validate_delta(self.delta)?;
        NoiseSchedule::new(self.sigma_eps, self.mode)?;
        Ok(())
    }

    pub fn sampling_ratio(&self) -> f64 {
        self.batch as f64 / self.n as f64
    }

    pub fn schedule(&self) -> NoiseSchedule {
        NoiseSchedule { sigma_eps: self.sigma_eps, mode: self.mode }
    }

    /// Largest admissible order at step `k`: `(s2_k / 2) ln(n/B)`.
    pub fn order_cap(&self, k: u64) -> Result<f64> {
        let var = self.schedule().variance_at(k)?;
        Ok(var / 2.0 * (self.n as f64 / self.batch as f64).ln())
    }
}

fn validate_delta(delta: f64) -> Result<()> {
    if !(delta > 0.0 && delta < 1.0) {
        return config(format!("delta must lie in (0, 1), got {delta}"));
    }
    Ok(())
}

fn step_cost(q_sq: f64, inv_var: f64, eta: u32) -> f64 {
    RENYI_CONSTANT * q_sq * eta as f64 * inv_var
}

/// Rényi cost of step `k` at order `eta`.
///
/// Returns [`Error::OrderInadmissible`] when `eta` exceeds the step's cap; the
/// caller is expected to drop that order.
pub fn per_step_renyi(params: &MechanismParams, k: u64, eta: u32) -> Result<f64> {
    params.validate()?;
    if eta < 2 {
        return config(format!("Rényi order must be at least 2, got {eta}"));
    }
    let cap = params.order_cap(k)?;
    if eta as f64 > cap {
        return Err(Error::OrderInadmissible { eta, cap });
    }
    let q = params.sampling_ratio();
    Ok(step_cost(q * q, 1.0 / params.schedule().variance_at(k)?, eta))
}

/// A maximal run of consecutive steps with identical per-step cost.
#[derive(Debug, Clone, Copy, PartialEq)]
struct Run {
    q_sq: f64,
    inv_var: f64,
    count: u64,
}

/// `(eps, eta)` pair from a conversion.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Conversion {
    pub epsilon: f64,
    pub order: u32,
}

/// Composed Rényi costs over a contiguous integer order grid.
///
/// Orders above the tightest per-step cap seen so far are retired and never
/// used for conversion again.
#[derive(Debug, Clone, PartialEq)]
pub struct PrivacyLedger {
    min_order: u32,
    max_order: u32,
    steps_done: u64,
    cap: f64,
    runs: Vec<Run>,
}

impl Default for PrivacyLedger {
    fn default() -> Self {
        Self::new()
    }
}

impl PrivacyLedger {
    /// Orders `2..=2000`.
    pub fn new() -> Self {
        Self::with_orders(2, DEFAULT_MAX_ORDER).expect("default grid is valid")
    }

    pub fn with_orders(min_order: u32, max_order: u32) -> Result<Self> {
        if min_order < 2 || max_order < min_order {
            return config(format!("order grid {min_order}..={max_order} must satisfy 2 <= min <= max"));
        }
        Ok(Self { min_order, max_order, steps_done: 0, cap: f64::INFINITY, runs: Vec::new() })
    }

    pub fn steps_done(&self) -> u64 {
        self.steps_done
    }

    /// Tightest per-step order cap accumulated so far (`+inf` before any step).
    pub fn order_cap(&self) -> f64 {
        self.cap
    }

    pub fn orders(&self) -> std::ops::RangeInclusive<u32> {
        self.min_order..=self.max_order
    }

    pub fn is_admissible(&self, eta: u32) -> bool {
        self.orders().contains(&eta) && eta as f64 <= self.cap
    }

    /// Orders still usable for conversion, ascending.
    pub fn admissible_orders(&self) -> impl Iterator<Item = u32> + '_ {
        let top = if self.cap.is_finite() { (self.cap.floor() as u64).min(self.max_order as u64) as u32 } else { self.max_order };
        self.min_order..=top.max(self.min_order.saturating_sub(1))
    }

    /// Composed cost at order `eta`, whether or not the order is still admissible.
    pub fn renyi_total(&self, eta: u32) -> f64 {
        self.runs.iter().map(|r| r.count as f64 * step_cost(r.q_sq, r.inv_var, eta)).sum()
    }

    /// Accounts step `k`, which must be the next step in sequence.
    pub fn accumulate_step(&mut self, params: &MechanismParams, k: u64) -> Result<()> {
        if k != self.steps_done + 1 {
            return Err(Error::Usage(format!("expected step {}, got step {k}", self.steps_done + 1)));
        }
        params.validate()?;
        let var = params.schedule().variance_at(k)?;
        let cap = params.order_cap(k)?;
        let q = params.sampling_ratio();
        let run = Run { q_sq: q * q, inv_var: if var > 0.0 { 1.0 / var } else { f64::INFINITY }, count: 1 };
        match self.runs.last_mut() {
            Some(last) if last.q_sq == run.q_sq && last.inv_var == run.inv_var => last.count += 1,
            _ => self.runs.push(run),
        }
        self.cap = self.cap.min(cap);
        self.steps_done = k;
        Ok(())
    }

    /// Smallest `eps` over admissible orders for the given `delta`, and the order attaining it.
    pub fn epsilon_at_delta(&self, delta: f64) -> Result<Conversion> {
        validate_delta(delta)?;
        let log_inv_delta = (1.0 / delta).ln();
        let mut best: Option<Conversion> = None;
        for eta in self.admissible_orders() {
            let epsilon = self.renyi_total(eta) + log_inv_delta / (eta as f64 - 1.0);
            if best.is_none_or(|b| epsilon < b.epsilon) {
                best = Some(Conversion { epsilon, order: eta });
            }
        }
        best.ok_or(Error::NoAdmissibleOrder)
    }

    /// Plain-text `key = value` snapshot.
    pub fn to_record(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "{RECORD_HEADER}");
        let _ = writeln!(out, "min_order = {}", self.min_order);
        let _ = writeln!(out, "max_order = {}", self.max_order);
        let _ = writeln!(out, "steps_done = {}", self.steps_done);
        let _ = writeln!(out, "order_cap = {}", self.cap);
        for r in &self.runs {
            let _ = writeln!(out, "run = {} {} {}", r.q_sq, r.inv_var, r.count);
        }
        let totals: Vec<String> = self.admissible_orders().map(|eta| format!("{eta}:{}", self.renyi_total(eta))).collect();
        let _ = writeln!(out, "totals = {}", totals.join(","));
        out
    }

    /// Restores a ledger written by [`PrivacyLedger::to_record`].
    ///
    /// Totals are recomputed from the recorded runs and compared against the
    /// `totals` line when present.
    pub fn from_record(text: &str) -> Result<Self> {
        let mut min_order = None;
        let mut max_order = None;
        let mut steps = None;
        let mut cap = None;
        let mut runs = Vec::new();
        let mut totals = None;
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let bad = |what: &str| Error::Config(format!("ledger record line {}: {what}", lineno + 1));
            let (key, value) = line.split_once('=').ok_or_else(|| bad("expected key = value"))?;
            let value = value.trim();
            match key.trim() {
                "min_order" => min_order = Some(value.parse::<u32>().map_err(|_| bad("bad min_order"))?),
                "max_order" => max_order = Some(value.parse::<u32>().map_err(|_| bad("bad max_order"))?),
                "steps_done" => steps = Some(value.parse::<u64>().map_err(|_| bad("bad steps_done"))?),
                "order_cap" => cap = Some(value.parse::<f64>().map_err(|_| bad("bad order_cap"))?),
                "run" => {
                    let parts: Vec<&str> = value.split_whitespace().collect();
                    if parts.len() != 3 {
                        return Err(bad("run needs three fields"));
                    }
                    runs.push(Run {
                        q_sq: parts[0].parse().map_err(|_| bad("bad run q^2"))?,
                        inv_var: parts[1].parse().map_err(|_| bad("bad run inverse variance"))?,
                        count: parts[2].parse().map_err(|_| bad("bad run count"))?,
                    });
                }
                "totals" => totals = Some(value.to_string()),
                other => return Err(bad(&format!("unknown key {other}"))),
            }
        }
        let missing = |k: &str| Error::Config(format!("ledger record missing {k}"));
        let mut ledger = Self::with_orders(min_order.ok_or_else(|| missing("min_order"))?, max_order.ok_or_else(|| missing("max_order"))?)?;
        ledger.steps_done = steps.ok_or_else(|| missing("steps_done"))?;
        ledger.cap = cap.ok_or_else(|| missing("order_cap"))?;
        ledger.runs = runs;
        if ledger.runs.iter().map(|r| r.count).sum::<u64>() != ledger.steps_done {
            return config("ledger record run counts do not add up to steps_done");
        }
        if let Some(totals) = totals.filter(|t| !t.is_empty()) {
            for item in totals.split(',') {
                let (eta, val) = item.split_once(':').ok_or_else(|| missing("order:total pair"))?;
                let eta: u32 = eta.trim().parse().map_err(|_| missing("numeric order"))?;
                let val: f64 = val.trim().parse().map_err(|_| missing("numeric total"))?;
                if val != ledger.renyi_total(eta) {
                    return config(format!("ledger record total at order {eta} is inconsistent with its runs"));
                }
            }
        }
        Ok(ledger)
    }
}

/// Ledger after `steps` sequential steps of the same mechanism.
pub fn ledger_after(params: &MechanismParams, steps: u64) -> Result<PrivacyLedger> {
    let mut ledger = PrivacyLedger::new();
    for k in 1..=steps {
        ledger.accumulate_step(params, k)?;
    }
    Ok(ledger)
}

/// `eps` after `steps` steps; `+inf` when no order stays admissible.
pub fn epsilon_after(params: &MechanismParams, steps: u64) -> Result<f64> {
    match ledger_after(params, steps)?.epsilon_at_delta(params.delta) {
        Ok(c) => Ok(c.epsilon),
        Err(Error::NoAdmissibleOrder) => Ok(f64::INFINITY),
        Err(e) => Err(e),
    }
}

/// Implied constant `C1 = eps n^2 / (B^2 K)` and whether it stays under a ceiling.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct C1Check {
    pub implied: f64,
    pub within_bound: bool,
}

pub fn c1_feasibility(n: u64, batch: u64, steps: u64, eps: f64, ceiling: f64) -> C1Check {
    let implied = eps * (n as f64).powi(2) / ((batch as f64).powi(2) * steps as f64);
    C1Check { implied, within_bound: implied <= ceiling }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SigmaCalibration {
    pub sigma_eps: f64,
    /// `eps` reached with `sigma_eps` after the requested steps.
    pub epsilon: f64,
    pub c1: C1Check,
}

/// Smallest base noise level (to 1e-6 relative) whose composed `eps` after
/// `steps` steps stays at or below `eps_target`.
pub fn required_sigma(n: u64, batch: u64, steps: u64, eps_target: f64, delta: f64, mode: ScheduleMode) -> Result<SigmaCalibration> {
    if !(eps_target > 0.0 && eps_target.is_finite()) {
        return config(format!("target epsilon must be positive, got {eps_target}"));
    }
    if steps == 0 {
        return config("need at least one step");
    }
    MechanismParams::new(n, batch, 1.0, mode, delta)?;
    let eps_of = |sigma: f64| epsilon_after(&MechanismParams { n, batch, sigma_eps: sigma, mode, delta }, steps);

    let mut hi = 1.0;
    while eps_of(hi)? > eps_target {
        hi *= 2.0;
        if hi > 1e9 {
            return Err(Error::Infeasible(format!(
                "no noise level reaches eps <= {eps_target} on orders up to {DEFAULT_MAX_ORDER}"
            )));
        }
    }
    let mut lo = hi / 2.0;
    while eps_of(lo)? <= eps_target {
        hi = lo;
        lo /= 2.0;
        if lo < 1e-12 {
            break;
        }
    }
    while (hi - lo) / hi > 1e-7 {
        let mid = 0.5 * (lo + hi);
        if eps_of(mid)? <= eps_target {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    Ok(SigmaCalibration { sigma_eps: hi, epsilon: eps_of(hi)?, c1: c1_feasibility(n, batch, steps, eps_target, DEFAULT_C1_CEILING) })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn static_params(sigma: f64) -> MechanismParams {
        MechanismParams::new(10_000, 100, sigma, ScheduleMode::Static, 1e-5).unwrap()
    }

    #[test]
    fn per_step_hand_value() {
        let v = per_step_renyi(&static_params(3.0), 1, 2).unwrap();
        assert!((v - 7.0 * 1e-4 * 2.0 / 9.0).abs() < 1e-18);
        assert!((v - 1.5556e-4).abs() < 1e-8);
    }

    #[test]
    fn dynamic_is_static_times_k() {
        let st = static_params(3.0);
        let dy = MechanismParams { mode: ScheduleMode::Dynamic, ..st };
        for k in [1u64, 2, 3] {
            let s = per_step_renyi(&st, k, 2).unwrap();
            let d = per_step_renyi(&dy, k, 2).unwrap();
            assert!((d - s * k as f64).abs() <= 1e-15 * d);
        }
    }

    #[test]
    fn admissibility_cap() {
        let p = static_params(3.0);
        assert!((p.order_cap(1).unwrap() - 4.5 * 100f64.ln()).abs() < 1e-12);
        assert!(per_step_renyi(&p, 1, 20).is_ok());
        assert!(matches!(per_step_renyi(&p, 1, 21), Err(Error::OrderInadmissible { eta: 21, .. })));
    }

    #[test]
    fn sampling_ratio_guard() {
        assert!(MechanismParams::new(100, 10, 3.0, ScheduleMode::Static, 1e-5).is_err());
        assert!(MechanismParams::new(100, 9, 3.0, ScheduleMode::Static, 1e-5).is_ok());
        assert!(MechanismParams::new(100, 9, 3.0, ScheduleMode::Static, 1.0).is_err());
        assert!(per_step_renyi(&MechanismParams { batch: 1000, ..static_params(3.0) }, 1, 2).is_err());
    }

    #[test]
    fn sequential_steps_enforced() {
        let mut l = PrivacyLedger::new();
        let p = static_params(3.0);
        assert!(matches!(l.accumulate_step(&p, 2), Err(Error::Usage(_))));
        l.accumulate_step(&p, 1).unwrap();
        assert!(matches!(l.accumulate_step(&p, 1), Err(Error::Usage(_))));
    }

    #[test]
    fn empty_ledger() {
        let l = PrivacyLedger::new();
        assert!(l.orders().all(|eta| l.renyi_total(eta) == 0.0));
        let wide = PrivacyLedger::with_orders(2, 1_000_000).unwrap();
        let c = wide.epsilon_at_delta(1e-5).unwrap();
        assert!(c.epsilon <= 1e5f64.ln() / 999_999.0 + 1e-18);
        assert!(c.epsilon < 1.2e-5);
    }

    #[test]
    fn static_additivity_exact() {
        let p = static_params(3.0);
        let l = ledger_after(&p, 37).unwrap();
        for eta in l.admissible_orders() {
            assert_eq!(l.renyi_total(eta), 37.0 * per_step_renyi(&p, 1, eta).unwrap());
        }
    }

    #[test]
    fn dynamic_totals_are_triangular() {
        let p = MechanismParams { sigma_eps: 40.0, mode: ScheduleMode::Dynamic, ..static_params(1.0) };
        let k = 25u64;
        let l = ledger_after(&p, k).unwrap();
        let base = MechanismParams { mode: ScheduleMode::Static, ..p };
        assert!(l.admissible_orders().count() > 0);
        for eta in l.admissible_orders() {
            let want = per_step_renyi(&base, 1, eta).unwrap() * (k * (k + 1) / 2) as f64;
            assert!((l.renyi_total(eta) - want).abs() <= 1e-12 * want);
        }
        // The cap is tightest at the last step.
        assert!((l.order_cap() - p.order_cap(k).unwrap()).abs() < 1e-12);
    }

    #[test]
    fn worked_conversion() {
        let p = static_params(4.0);
        let l = ledger_after(&p, 100).unwrap();
        let c = l.epsilon_at_delta(1e-5).unwrap();
        assert_eq!(c.order, 36);
        assert!((c.epsilon - 0.4864).abs() < 1e-3, "{}", c.epsilon);
    }

    #[test]
    fn no_admissible_order_is_an_error() {
        let p = MechanismParams { sigma_eps: 1.0, mode: ScheduleMode::Dynamic, ..static_params(1.0) };
        let l = ledger_after(&p, 10).unwrap();
        assert_eq!(l.epsilon_at_delta(1e-5), Err(Error::NoAdmissibleOrder));
        assert_eq!(epsilon_after(&p, 10).unwrap(), f64::INFINITY);
        let zero = static_params(0.0);
        assert_eq!(ledger_after(&zero, 1).unwrap().epsilon_at_delta(1e-5), Err(Error::NoAdmissibleOrder));
    }

    #[test]
    fn record_round_trip() {
        let p = MechanismParams { sigma_eps: 30.0, mode: ScheduleMode::Dynamic, ..static_params(1.0) };
        let l = ledger_after(&p, 12).unwrap();
        let text = l.to_record();
        assert!(text.starts_with(RECORD_HEADER));
        let back = PrivacyLedger::from_record(&text).unwrap();
        assert_eq!(back, l);
        assert_eq!(back.epsilon_at_delta(1e-5), l.epsilon_at_delta(1e-5));

        let mut resumed = back;
        resumed.accumulate_step(&p, 13).unwrap();
        assert_eq!(resumed, ledger_after(&p, 13).unwrap());

        let tampered = text.replace("steps_done = 12", "steps_done = 11");
        assert!(PrivacyLedger::from_record(&tampered).is_err());
        assert!(PrivacyLedger::from_record("min_order = 2\n").is_err());
    }

    #[test]
    fn c1_examples() {
        let c = c1_feasibility(60_000, 1024, 40, 2.75, DEFAULT_C1_CEILING);
        assert!((c.implied - 236.1).abs() < 0.1, "{}", c.implied);
        assert!(c.within_bound);
        assert_eq!(c1_feasibility(60_000, 1024, 40, 0.0, DEFAULT_C1_CEILING).implied, 0.0);
        let a = c1_feasibility(1000, 10, 7, 0.3, 1.0).implied;
        let b = c1_feasibility(1000, 10, 7, 0.6, 1.0).implied;
        assert!((b - 2.0 * a).abs() < 1e-12 * b);
        assert!(!c1_feasibility(1000, 10, 7, 100.0, 1.0).within_bound);
    }

    #[test]
    fn required_sigma_brackets_target() {
        for mode in [ScheduleMode::Static, ScheduleMode::Dynamic] {
            let cal = required_sigma(10_000, 100, 50, 1.0, 1e-5, mode).unwrap();
            let p = MechanismParams::new(10_000, 100, cal.sigma_eps, mode, 1e-5).unwrap();
            assert!(epsilon_after(&p, 50).unwrap() <= 1.0);
            let below = MechanismParams { sigma_eps: cal.sigma_eps * (1.0 - 1e-4), ..p };
            assert!(epsilon_after(&below, 50).unwrap() > 1.0);
        }
    }

    #[test]
    fn required_sigma_orderings() {
        let s = required_sigma(10_000, 100, 40, 1.0, 1e-5, ScheduleMode::Static).unwrap().sigma_eps;
        let d = required_sigma(10_000, 100, 40, 1.0, 1e-5, ScheduleMode::Dynamic).unwrap().sigma_eps;
        assert!(d >= s);
        let d2 = required_sigma(10_000, 100, 80, 1.0, 1e-5, ScheduleMode::Dynamic).unwrap().sigma_eps;
        assert!(d2 > d);
    }

    #[test]
    fn required_sigma_infeasible_and_invalid() {
        // Below ln(1/delta)/(max_order - 1) no noise level suffices.
        assert!(matches!(required_sigma(10_000, 100, 10, 1e-4, 1e-5, ScheduleMode::Static), Err(Error::Infeasible(_))));
        assert!(required_sigma(10_000, 100, 10, 0.0, 1e-5, ScheduleMode::Static).is_err());
        assert!(required_sigma(100, 50, 10, 1.0, 1e-5, ScheduleMode::Static).is_err());
    }
}
