//! Transfer operators `Q = e^{-βU}` normalized by `Q(0) = 1`, their deviation
//! norms `‖Q − 1_0‖_{(d+1)/2}`, the class-summed operator on `Z_q`, and the
//! strong-coupling thresholds for the SOS and log potentials.

use serde::{Deserialize, Serialize};

use crate::constants::eta_dn;
use crate::error::{Error, Result};
use crate::seqspace::{lp_norm, GroupSpace, SeqFn};
use crate::zeta::{zeta, zeta_inverse};

/// Default bound on the discarded `(d+1)/2`-norm tail of a windowed operator.
pub const DEFAULT_TAIL_TOLERANCE: f64 = 1e-12;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum PotentialKind {
    /// `U(i) = |i|`.
    Sos { beta: f64 },
    /// `U(i) = log(1 + |i|)`.
    Log { beta: f64 },
    /// `U(i) = |i|^p`.
    Psos { beta: f64, p: f64 },
    /// Explicit table on the space.
    Custom,
}

impl PotentialKind {
    fn formula(&self, i: i64) -> Option<f64> {
        let a = i.unsigned_abs() as f64;
        match *self {
            PotentialKind::Sos { beta } => Some((-beta * a).exp()),
            PotentialKind::Log { beta } => Some((1.0 + a).powf(-beta)),
            PotentialKind::Psos { beta, p } => Some((-beta * a.powf(p)).exp()),
            PotentialKind::Custom => None,
        }
    }

    /// `Σ_{|i|>L} Q(i)^s` for the infinite-volume operator, or an upper bound
    /// on it. `None` when the series diverges or no bound is available.
    fn tail_power_sum(&self, radius: usize, s: f64) -> Option<f64> {
        let l = radius as f64;
        match *self {
            PotentialKind::Sos { beta } => {
                let r = (-beta * s).exp();
                Some(2.0 * r.powf(l + 1.0) / (1.0 - r))
            }
            PotentialKind::Log { beta } => {
                // Σ_{k ≥ L+2} k^{-t} ≤ ∫_{L+1}^∞ x^{-t} dx.
                let t = beta * s;
                (t > 1.0).then(|| 2.0 * (l + 1.0).powf(1.0 - t) / (t - 1.0))
            }
            PotentialKind::Psos { beta, p } => {
                // Σ_{k > L} e^{-c k^p} ≤ ∫_L^∞ e^{-c x^p} dx = c^{-a} a Γ(a, c L^p), a = 1/p.
                let c = beta * s;
                let a = 1.0 / p;
                let x = c * l.powf(p);
                let gamma_upper = if a <= 1.0 {
                    x.powf(a - 1.0) * (-x).exp()
                } else if x > a - 1.0 {
                    x.powf(a - 1.0) * (-x).exp() * x / (x - (a - 1.0))
                } else {
                    return None;
                };
                Some(2.0 * c.powf(-a) * a * gamma_upper)
            }
            PotentialKind::Custom => Some(0.0),
        }
    }
}

/// A symmetric nonnegative transfer operator with `Q(0) = 1`, stored on a
/// [`GroupSpace`]. Formula kinds on `Z_q` use the distance `min(i, q − i)`.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct TransferOperator {
    kind: PotentialKind,
    table: SeqFn,
}

/// `‖Q − 1_0‖_{(d+1)/2}` with truncation diagnostics.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct DeviationNorm {
    /// Norm of the operator as represented on the space.
    pub epsilon: f64,
    /// `(Σ_{|i|>L} Q(i)^{(d+1)/2})^{2/(d+1)}`, the discarded tail.
    pub tail: f64,
    /// Infinite-volume value when a closed form exists.
    pub closed_form: Option<f64>,
}

impl TransferOperator {
    pub fn sos(beta: f64, space: GroupSpace) -> Result<Self> {
        check_beta(beta)?;
        Ok(Self::from_kind(PotentialKind::Sos { beta }, space))
    }

    pub fn log(beta: f64, space: GroupSpace) -> Result<Self> {
        check_beta(beta)?;
        Ok(Self::from_kind(PotentialKind::Log { beta }, space))
    }

    pub fn psos(beta: f64, p: f64, space: GroupSpace) -> Result<Self> {
        check_beta(beta)?;
        if !(p.is_finite() && p > 0.0) {
            return Err(Error::InvalidInput(format!("p-SOS exponent must be positive, got {p}")));
        }
        Ok(Self::from_kind(PotentialKind::Psos { beta, p }, space))
    }

    /// Operator from an explicit table. The table is rescaled so that
    /// `Q(0) = 1`, which leaves the specification unchanged.
    pub fn custom(table: SeqFn) -> Result<Self> {
        let space = table.space();
        let v = table.values();
        if let Some((index, &value)) = v.iter().enumerate().find(|(_, x)| **x < 0.0) {
            return Err(Error::NegativeEntry { index, value });
        }
        let zero = v[space.index_of(0).expect("zero is in every space")];
        if zero <= 0.0 {
            return Err(Error::InvalidInput("transfer operator must be positive at 0".into()));
        }
        for i in 0..space.size() {
            let a = v[i];
            let b = v[space.neg_index(i)];
            if (a - b).abs() > 1e-14 * a.abs().max(b.abs()) {
                return Err(Error::InvalidInput(format!(
                    "transfer operator is not symmetric at {}",
                    space.element(i)
                )));
            }
        }
        let table = table.map(|x| x / zero);
        Ok(TransferOperator { kind: PotentialKind::Custom, table })
    }

    /// The identity operator `1_0`.
    pub fn identity(space: GroupSpace) -> Self {
        let table = SeqFn::indicator(space, &[0]).expect("zero is in every space");
        TransferOperator { kind: PotentialKind::Custom, table }
    }

    fn from_kind(kind: PotentialKind, space: GroupSpace) -> Self {
        let table = SeqFn::from_fn(space, |e| {
            let a = match space {
                GroupSpace::Cyclic { modulus } => e.min(modulus as i64 - e),
                GroupSpace::IntegerWindow { .. } => e,
            };
            kind.formula(a).expect("formula kind")
        });
        TransferOperator { kind, table }
    }

    /// Same potential on a window large enough that the discarded
    /// `(d+1)/2`-norm tail is at most `tolerance`.
    pub fn with_auto_radius(kind: PotentialKind, d: u32, tolerance: f64) -> Result<Self> {
        let radius = auto_radius(kind, d, tolerance)?;
        Ok(Self::from_kind(kind, GroupSpace::window(radius)?))
    }

    pub fn kind(&self) -> PotentialKind {
        self.kind
    }

    pub fn space(&self) -> GroupSpace {
        self.table.space()
    }

    pub fn table(&self) -> &SeqFn {
        &self.table
    }

    /// `Q(i)`. Formula kinds are evaluated exactly, also outside a window.
    pub fn evaluate(&self, i: i64) -> f64 {
        match (self.kind, self.space()) {
            (PotentialKind::Custom, _) | (_, GroupSpace::Cyclic { .. }) => self.table.get(i),
            (kind, GroupSpace::IntegerWindow { .. }) => kind.formula(i).expect("formula kind"),
        }
    }

    /// `−log Q(i − j)`, the translation-invariant distance induced by `Q`.
    pub fn dist_q(&self, i: i64, j: i64) -> Result<f64> {
        let space = self.space();
        let diff = space.reduce(i - j);
        if diff == 0 {
            return Ok(0.0);
        }
        let v = self.evaluate(diff);
        if v >= 1.0 {
            return Err(Error::Domain { function: "dist_q", value: v });
        }
        Ok(-v.ln())
    }

    /// `Q − 1_0` as a function on the space.
    pub fn deviation(&self) -> SeqFn {
        let space = self.space();
        let zero = space.index_of(0).expect("zero is in every space");
        let mut v = self.table.values().to_vec();
        v[zero] -= 1.0;
        SeqFn::new(space, v).expect("finite table")
    }

    /// Discarded tail `(Σ_{|i|>L} Q(i)^{(d+1)/2})^{2/(d+1)}`; zero on `Z_q`
    /// and for explicit tables.
    pub fn tail_norm(&self, d: u32) -> f64 {
        let s = (d as f64 + 1.0) / 2.0;
        self.tail_power_sum(s).map_or(f64::INFINITY, |t| t.powf(1.0 / s))
    }

    /// `Σ_{|i|>L} Q(i)^s` (or an upper bound on it).
    pub fn tail_power_sum(&self, s: f64) -> Option<f64> {
        match self.space() {
            GroupSpace::Cyclic { .. } => Some(0.0),
            GroupSpace::IntegerWindow { radius } => self.kind.tail_power_sum(radius, s),
        }
    }

    /// Closed-form `‖Q − 1_0‖_{(d+1)/2}` on all of `Z`, when available.
    pub fn closed_form_norm(&self, d: u32) -> Option<f64> {
        if self.space().is_cyclic() {
            return None;
        }
        match self.kind {
            PotentialKind::Sos { beta } => Some(sos_closed_form_norm(d, beta)),
            PotentialKind::Log { beta } => log_closed_form_norm(d, beta).ok(),
            _ => None,
        }
    }

    /// `ε = ‖Q − 1_0‖_{(d+1)/2}` with the default tail tolerance.
    pub fn deviation_norm(&self, d: u32) -> Result<DeviationNorm> {
        self.deviation_norm_with_tolerance(d, DEFAULT_TAIL_TOLERANCE)
    }

    pub fn deviation_norm_with_tolerance(&self, d: u32, tolerance: f64) -> Result<DeviationNorm> {
        let s = (d as f64 + 1.0) / 2.0;
        let tail = self.tail_norm(d);
        if tail.is_nan() || tail > tolerance {
            return Err(Error::Truncation { tail, tolerance });
        }
        let epsilon = lp_norm(self.deviation().values(), s)?;
        Ok(DeviationNorm { epsilon, tail, closed_form: self.closed_form_norm(d) })
    }

    /// The class-summed operator on `Z_q`, normalized at `0̄`.
    pub fn fuzzy_operator(&self, q: usize) -> Result<FuzzyOperator> {
        self.fuzzy_operator_with_tolerance(q, 1e-10)
    }

    pub fn fuzzy_operator_with_tolerance(&self, q: usize, tolerance: f64) -> Result<FuzzyOperator> {
        let space = self.space();
        if space.is_cyclic() {
            return Err(Error::InvalidInput("fuzzy operator needs an integer window".into()));
        }
        let cyclic = GroupSpace::cyclic(q)?;
        let tail_l1 = self.tail_power_sum(1.0).unwrap_or(f64::INFINITY);
        if tail_l1.is_nan() || tail_l1 > tolerance {
            return Err(Error::Truncation { tail: tail_l1, tolerance });
        }
        let mut class_sums = vec![0.0; q];
        for (e, &v) in space.elements().zip(self.table.values()) {
            class_sums[cyclic.reduce(e) as usize] += v;
        }
        let zero_mass = class_sums[0];
        let normalized = SeqFn::new(cyclic, class_sums.iter().map(|v| v / zero_mass).collect())?;
        Ok(FuzzyOperator {
            operator: TransferOperator { kind: PotentialKind::Custom, table: normalized },
            class_sums: SeqFn::new(cyclic, class_sums)?,
            zero_mass,
            tail_l1,
        })
    }
}

fn check_beta(beta: f64) -> Result<()> {
    if beta.is_finite() && beta > 0.0 {
        Ok(())
    } else {
        Err(Error::InvalidInput(format!("inverse temperature must be positive, got {beta}")))
    }
}

/// The class-summed operator `Q_q(ī) = Σ_{j ≡ i} Q(j)` on `Z_q`.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct FuzzyOperator {
    /// `Q_q / Q_q(0̄)`.
    pub operator: TransferOperator,
    /// Unnormalized class sums `Q^q(ī)`.
    pub class_sums: SeqFn,
    /// `Q^q(0̄)` before normalization.
    pub zero_mass: f64,
    /// `Σ_{|i|>L} Q(i)` dropped by the window.
    pub tail_l1: f64,
}

/// Smallest window radius whose discarded `(d+1)/2`-norm tail is at most
/// `tolerance`.
pub fn auto_radius(kind: PotentialKind, d: u32, tolerance: f64) -> Result<usize> {
    const MAX_RADIUS: usize = 1 << 20;
    let s = (d as f64 + 1.0) / 2.0;
    let ok = |l: usize| kind.tail_power_sum(l, s).is_some_and(|t| t.powf(1.0 / s) <= tolerance);
    if matches!(kind, PotentialKind::Custom) {
        return Err(Error::InvalidInput("explicit tables have a fixed window".into()));
    }
    let mut hi = 1;
    while !ok(hi) {
        hi *= 2;
        if hi > MAX_RADIUS {
            return Err(Error::Truncation {
                tail: kind.tail_power_sum(MAX_RADIUS, s).unwrap_or(f64::INFINITY),
                tolerance,
            });
        }
    }
    let mut lo = hi / 2;
    if lo == 0 {
        return Ok(1);
    }
    while hi - lo > 1 {
        let mid = (lo + hi) / 2;
        if ok(mid) {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    Ok(hi)
}

/// `(2 / (e^{(d+1)β/2} − 1))^{2/(d+1)}`, the SOS deviation norm on `Z`.
pub fn sos_closed_form_norm(d: u32, beta: f64) -> f64 {
    let s = (d as f64 + 1.0) / 2.0;
    (2.0 / (s * beta).exp_m1()).powf(1.0 / s)
}

/// `(2ζ((d+1)β/2) − 2)^{2/(d+1)}`, the log-potential deviation norm on `Z`.
pub fn log_closed_form_norm(d: u32, beta: f64) -> Result<f64> {
    let s = (d as f64 + 1.0) / 2.0;
    Ok((2.0 * (zeta(s * beta)? - 1.0)).powf(1.0 / s))
}

/// Smallest `β` for which the SOS operator satisfies `ε ≤ η(d,n)`:
/// `(2/(d+1)) log(1 + 2η^{-(d+1)/2})`.
pub fn sos_threshold(d: u32, n: u32) -> f64 {
    let s = (d as f64 + 1.0) / 2.0;
    (2.0 * eta_dn(d, n).powf(-s)).ln_1p() / s
}

/// Smallest `β` for which the log operator satisfies `ε ≤ η(d,n)`:
/// `(2/(d+1)) ζ^{-1}(1 + η^{(d+1)/2}/2)`.
pub fn log_threshold(d: u32, n: u32) -> f64 {
    let s = (d as f64 + 1.0) / 2.0;
    let y = 1.0 + 0.5 * eta_dn(d, n).powf(s);
    zeta_inverse(y).expect("argument exceeds one") / s
}
