//! Faà di Bruno expansions of `f(γ(t))` and `E(f(γ(t)))` along trajectory jets.
//!
//! A jet stores `(ρ′, ρ″, …, ρ⁽ᵏ⁾)` for the germ `γ(t) = ρ + Σ ρ⁽ⁱ⁾ tⁱ/i!`.

use nalgebra::DVector;

use crate::derivatives::{ConstraintJets, Evaluator};
use crate::energy::EnergyModel;
use crate::error::{Error, Result};
use crate::scalar::Real;
use crate::series::Series;

/// Largest order for which partition coefficients fit in `u128`.
pub const MAX_PARTITION_ORDER: usize = 33;

/// Integer partition of `i` with multiplicities `m_1 … m_i`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Partition {
    parts: Vec<usize>,
    multiplicities: Vec<usize>,
    multinomial: u128,
    coefficient: u128,
}

fn factorial(n: usize) -> u128 {
    (1..=n as u128).product()
}

impl Partition {
    fn from_parts(parts: Vec<usize>) -> Partition {
        let i: usize = parts.iter().sum();
        let mut multiplicities = vec![0; i];
        for &p in &parts {
            multiplicities[p - 1] += 1;
        }
        let denom: u128 = multiplicities.iter().map(|&m| factorial(m)).product();
        let multinomial = factorial(i) / denom;
        let scale: u128 = multiplicities
            .iter()
            .enumerate()
            .map(|(j, &m)| factorial(j + 1).pow(m as u32))
            .product();
        Partition {
            parts,
            multiplicities,
            multinomial,
            coefficient: multinomial / scale,
        }
    }

    /// `i = Σ j·m_j`.
    pub fn order(&self) -> usize {
        self.parts.iter().sum()
    }

    /// Number of parts `k = Σ m_j`, i.e. the derivative order of `f` used.
    pub fn len(&self) -> usize {
        self.parts.len()
    }

    pub fn is_empty(&self) -> bool {
        self.parts.is_empty()
    }

    /// Parts in non-increasing order.
    pub fn parts(&self) -> &[usize] {
        &self.parts
    }

    /// `(m_1, …, m_i)`.
    pub fn multiplicities(&self) -> &[usize] {
        &self.multiplicities
    }

    /// `i! / (m_1! ⋯ m_i!)`.
    pub fn multinomial(&self) -> u128 {
        self.multinomial
    }

    /// Multinomial divided by `Π (j!)^{m_j}`: the weight of
    /// `dᵏf/dρᵏ · (ρ⁽ʲ¹⁾ ⊗ … ⊗ ρ⁽ʲᵏ⁾)` in `dⁱf/dtⁱ`.
    pub fn coefficient(&self) -> u128 {
        self.coefficient
    }
}

/// All partitions of `i`, largest part first, in reverse lexicographic order.
///
/// Panics if `i` is zero or exceeds [`MAX_PARTITION_ORDER`].
pub fn enumerate_partitions(i: usize) -> Vec<Partition> {
    assert!((1..=MAX_PARTITION_ORDER).contains(&i), "partition order {i} out of range");
    let mut out = Vec::new();
    let mut stack = Vec::new();
    fn rec(rest: usize, max: usize, stack: &mut Vec<usize>, out: &mut Vec<Partition>) {
        if rest == 0 {
            out.push(Partition::from_parts(stack.clone()));
            return;
        }
        for p in (1..=rest.min(max)).rev() {
            stack.push(p);
            rec(rest - p, p, stack, out);
            stack.pop();
        }
    }
    rec(i, i, &mut stack, &mut out);
    out
}

/// Truncated trajectory germ `(ρ′, …, ρ⁽ᵏ⁾)`.
///
/// With `free_tail` set, entries beyond `k` read as zero; otherwise asking for
/// them is an [`Error::OrderExceeded`].
#[derive(Debug, Clone, PartialEq)]
pub struct TrajectoryJet {
    derivs: Vec<DVector<f64>>,
    free_tail: bool,
}

impl TrajectoryJet {
    pub fn new(derivs: Vec<DVector<f64>>) -> Result<TrajectoryJet> {
        let Some(first) = derivs.first() else {
            return Err(Error::InvalidArgument("jet needs at least one derivative".into()));
        };
        let n = first.len();
        if let Some(bad) = derivs.iter().find(|d| d.len() != n) {
            return Err(Error::DimensionMismatch {
                expected: n,
                found: bad.len(),
            });
        }
        if derivs.iter().flatten().any(|x| !x.is_finite()) {
            return Err(Error::InvalidArgument("jet has non-finite entries".into()));
        }
        Ok(TrajectoryJet {
            derivs,
            free_tail: false,
        })
    }

    /// Straight line `ρ + t·v`.
    pub fn first_order(v: DVector<f64>) -> TrajectoryJet {
        TrajectoryJet {
            derivs: vec![v],
            free_tail: true,
        }
    }

    /// Mark entries past the stored length as zero.
    pub fn with_free_tail(mut self, free: bool) -> TrajectoryJet {
        self.free_tail = free;
        self
    }

    pub fn free_tail(&self) -> bool {
        self.free_tail
    }

    /// Number of stored derivatives.
    pub fn len(&self) -> usize {
        self.derivs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.derivs.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.derivs[0].len()
    }

    pub fn derivs(&self) -> &[DVector<f64>] {
        &self.derivs
    }

    /// `ρ⁽ⁱ⁾`, 1-based.
    pub fn deriv(&self, i: usize) -> Option<&DVector<f64>> {
        i.checked_sub(1).and_then(|k| self.derivs.get(k))
    }

    pub fn push(&mut self, v: DVector<f64>) -> Result<()> {
        if v.len() != self.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.dim(),
                found: v.len(),
            });
        }
        self.derivs.push(v);
        Ok(())
    }

    /// First `len` derivatives.
    pub fn truncated(&self, len: usize) -> TrajectoryJet {
        TrajectoryJet {
            derivs: self.derivs[..len.min(self.len())].to_vec(),
            free_tail: self.free_tail,
        }
    }

    /// Index of the first nonzero derivative, `None` for the zero jet.
    pub fn active_order(&self) -> Option<usize> {
        self.derivs
            .iter()
            .position(|d| d.iter().any(|&x| x != 0.0))
            .map(|k| k + 1)
    }

    /// `ρ⁽ʲ⁾`, `Ok(None)` for an exactly zero entry or one in a free tail.
    fn entry(&self, j: usize) -> Result<Option<&DVector<f64>>> {
        match self.deriv(j) {
            Some(v) if v.iter().all(|&x| x == 0.0) => Ok(None),
            Some(v) => Ok(Some(v)),
            None if self.free_tail => Ok(None),
            None => Err(Error::OrderExceeded {
                requested: j,
                available: self.len(),
            }),
        }
    }

    /// `γ(t) − ρ`.
    pub fn displacement(&self, t: f64) -> DVector<f64> {
        let mut out = DVector::zeros(self.dim());
        let mut w = 1.0;
        for (i, d) in self.derivs.iter().enumerate() {
            w *= t / (i + 1) as f64;
            out.axpy(w, d, 1.0);
        }
        out
    }

    /// Jet of `γ(τ(t))` with `τ′(0) = 1` and `τ⁽ⁱ⁺¹⁾(0) = c_i`.
    pub fn reparametrize(&self, c: &[f64]) -> TrajectoryJet {
        let n = self.len();
        // τ(t) as a polynomial in t, coefficients 0..=n
        let mut tau = vec![0.0; n + 1];
        if n >= 1 {
            tau[1] = 1.0;
        }
        for (i, ci) in c.iter().enumerate() {
            if i + 2 <= n {
                tau[i + 2] = ci / factorial(i + 2) as f64;
            }
        }
        let mut coeffs = vec![DVector::zeros(self.dim()); n + 1];
        let mut power = vec![0.0; n + 1];
        power[0] = 1.0;
        for k in 1..=n {
            let mut next = vec![0.0; n + 1];
            for (a, pa) in power.iter().enumerate() {
                if *pa == 0.0 {
                    continue;
                }
                for b in 1..=n - a {
                    next[a + b] += pa * tau[b];
                }
            }
            power = next;
            let scale = 1.0 / factorial(k) as f64;
            for m in k..=n {
                if power[m] != 0.0 {
                    coeffs[m].axpy(power[m] * scale, &self.derivs[k - 1], 1.0);
                }
            }
        }
        let derivs = (1..=n).map(|m| &coeffs[m] * factorial(m) as f64).collect();
        TrajectoryJet {
            derivs,
            free_tail: self.free_tail,
        }
    }

    /// Reparametrize so every entry after `ρ′` is orthogonal to `ρ′`; returns
    /// the jet and the coefficients `c_i` used.
    pub fn normalized(&self) -> (TrajectoryJet, Vec<f64>) {
        let v1 = self.derivs[0].clone();
        let nn = v1.norm_squared();
        let mut jet = self.clone();
        let mut cs = vec![0.0; self.len().saturating_sub(1)];
        if nn == 0.0 {
            return (jet, cs);
        }
        for i in 1..self.len() {
            let ci = -jet.derivs[i].dot(&v1) / nn;
            let mut c = vec![0.0; i];
            c[i - 1] = ci;
            jet = jet.reparametrize(&c);
            cs[i - 1] = ci;
        }
        (jet, cs)
    }
}

fn check_jet(jet: &TrajectoryJet, cj: &ConstraintJets, i: usize) -> Result<()> {
    if i == 0 {
        return Err(Error::InvalidArgument("derivative order must be at least 1".into()));
    }
    if jet.dim() != cj.n_angles() {
        return Err(Error::DimensionMismatch {
            expected: cj.n_angles(),
            found: jet.dim(),
        });
    }
    if i > cj.kmax() {
        return Err(Error::OrderExceeded {
            requested: i,
            available: cj.kmax(),
        });
    }
    Ok(())
}

/// Sum of `coef · dᵏf/dρᵏ · (ρ⁽ʲ¹⁾ ⊗ …)` over `terms`, skipping zero entries.
fn sum_terms<'a>(
    jet: &TrajectoryJet,
    cj: &ConstraintJets,
    terms: impl Iterator<Item = (f64, &'a [usize])>,
) -> Result<DVector<f64>> {
    let mut out = DVector::zeros(cj.n_rows());
    'term: for (coef, parts) in terms {
        let mut vs = Vec::with_capacity(parts.len());
        for &j in parts {
            match jet.entry(j)? {
                Some(v) => vs.push(v.as_slice()),
                None => continue 'term,
            }
        }
        out.axpy(coef, &cj.contract(parts.len(), &vs)?, 1.0);
    }
    Ok(out)
}

/// `dⁱf/dtⁱ` at `t = 0` from the general partition formula.
pub fn df_dt(jet: &TrajectoryJet, cj: &ConstraintJets, i: usize) -> Result<DVector<f64>> {
    check_jet(jet, cj, i)?;
    let parts = enumerate_partitions(i);
    sum_terms(
        jet,
        cj,
        parts.iter().map(|p| (p.coefficient() as f64, p.parts())),
    )
}

type Table = &'static [(u32, &'static [usize])];

/// Written-out expansions of `dⁱf/dtⁱ` for `i ≤ 6`.
const EXPANDED: [Table; 6] = [
    &[(1, &[1])],
    &[(1, &[2]), (1, &[1, 1])],
    &[(1, &[3]), (3, &[2, 1]), (1, &[1, 1, 1])],
    &[
        (1, &[4]),
        (4, &[3, 1]),
        (3, &[2, 2]),
        (6, &[2, 1, 1]),
        (1, &[1, 1, 1, 1]),
    ],
    &[
        (1, &[5]),
        (5, &[4, 1]),
        (10, &[3, 2]),
        (10, &[3, 1, 1]),
        (15, &[2, 2, 1]),
        (10, &[2, 1, 1, 1]),
        (1, &[1, 1, 1, 1, 1]),
    ],
    &[
        (1, &[6]),
        (6, &[5, 1]),
        (15, &[4, 2]),
        (10, &[3, 3]),
        (15, &[4, 1, 1]),
        (60, &[3, 2, 1]),
        (15, &[2, 2, 2]),
        (20, &[3, 1, 1, 1]),
        (45, &[2, 2, 1, 1]),
        (15, &[2, 1, 1, 1, 1]),
        (1, &[1, 1, 1, 1, 1, 1]),
    ],
];

/// Largest order with a written-out expansion.
pub const EXPANDED_MAX: usize = 6;

fn expanded_table(i: usize) -> Result<Table> {
    if i == 0 || i > EXPANDED_MAX {
        return Err(Error::OrderExceeded {
            requested: i,
            available: EXPANDED_MAX,
        });
    }
    Ok(EXPANDED[i - 1])
}

/// `dⁱf/dtⁱ` from the written-out expansion, `i ≤ 6`.
pub fn df_dt_expanded(jet: &TrajectoryJet, cj: &ConstraintJets, i: usize) -> Result<DVector<f64>> {
    check_jet(jet, cj, i)?;
    let table = expanded_table(i)?;
    sum_terms(jet, cj, table.iter().map(|(c, p)| (*c as f64, *p)))
}

fn check_energy(cj: &ConstraintJets, energy: &EnergyModel) -> Result<()> {
    if energy.n_rows() != cj.n_rows() {
        return Err(Error::DimensionMismatch {
            expected: cj.n_rows(),
            found: energy.n_rows(),
        });
    }
    Ok(())
}

/// `dⁱE/dtⁱ` at `t = 0`: the partition formula applied to `E ∘ (f ∘ γ)`.
/// Only one- and two-part partitions survive because `E` is quadratic in `f`.
pub fn de_dt(jet: &TrajectoryJet, cj: &ConstraintJets, energy: &EnergyModel, i: usize) -> Result<f64> {
    check_jet(jet, cj, i)?;
    check_energy(cj, energy)?;
    let f: Vec<DVector<f64>> = (1..=i).map(|a| df_dt(jet, cj, a)).collect::<Result<_>>()?;
    Ok(compose_energy(&f, energy))
}

/// Partition formula for a quadratic energy given `F_a = dᵃf/dtᵃ`, `a = 1..=i`.
pub fn compose_energy(f: &[DVector<f64>], energy: &EnergyModel) -> f64 {
    let i = f.len();
    let mut e = 0.0;
    for p in enumerate_partitions(i) {
        let c = p.coefficient() as f64;
        match *p.parts() {
            [a] => e += c * energy.prestress().dot(&f[a - 1]),
            [a, b] => e += c * f[a - 1].dot(&(energy.stiffness() * &f[b - 1])),
            _ => {}
        }
    }
    e
}

/// `dᵏ(E∘f)/dρᵏ · (u_1 ⊗ … ⊗ u_k)` at the base configuration.
pub fn energy_multilinear(cj: &ConstraintJets, energy: &EnergyModel, us: &[&[f64]]) -> Result<f64> {
    check_energy(cj, energy)?;
    let k = us.len();
    if k == 0 {
        return Err(Error::InvalidArgument("energy form needs at least one argument".into()));
    }
    let full = (1usize << k) - 1;
    let mut cache: Vec<Option<DVector<f64>>> = vec![None; full + 1];
    let mut image = |mask: usize| -> Result<DVector<f64>> {
        if let Some(v) = &cache[mask] {
            return Ok(v.clone());
        }
        let vs: Vec<&[f64]> = (0..k).filter(|b| mask >> b & 1 == 1).map(|b| us[b]).collect();
        let v = cj.contract(vs.len(), &vs)?;
        cache[mask] = Some(v.clone());
        Ok(v)
    };
    let mut e = energy.prestress().dot(&image(full)?);
    // unordered splits {S, Sᶜ}: take S to contain the first argument
    for mask in (1..full).filter(|m| m & 1 == 1) {
        let a = image(mask)?;
        let b = image(full ^ mask)?;
        e += a.dot(&(energy.stiffness() * b));
    }
    Ok(e)
}

/// `dⁱE/dtⁱ` from the written-out expansion applied to the `ρ`-derivatives
/// of `E ∘ f`, `i ≤ 6`.
pub fn de_dt_expanded(jet: &TrajectoryJet, cj: &ConstraintJets, energy: &EnergyModel, i: usize) -> Result<f64> {
    check_jet(jet, cj, i)?;
    let table = expanded_table(i)?;
    let mut e = 0.0;
    'term: for (c, parts) in table {
        let mut vs = Vec::with_capacity(parts.len());
        for &j in *parts {
            match jet.entry(j)? {
                Some(v) => vs.push(v.as_slice()),
                None => continue 'term,
            }
        }
        e += *c as f64 * energy_multilinear(cj, energy, &vs)?;
    }
    Ok(e)
}

/// Taylor coefficients of `f(ρ + Σ ρ⁽ⁱ⁾ tⁱ/i!)` up to degree `N − 1`,
/// evaluated in arithmetic `T`. Jet entries are given in `T` as well.
pub fn residual_series<T: Real, const N: usize>(
    evaluator: &Evaluator,
    base: &[f64],
    derivs: &[Vec<T>],
) -> Vec<Series<T, N>> {
    let mut inv_fact = T::one();
    let mut path: Vec<Series<T, N>> = base.iter().map(|&b| Series::constant(T::from_f64(b))).collect();
    for (i, d) in derivs.iter().enumerate().take(N.saturating_sub(1)) {
        inv_fact = inv_fact / T::from_f64((i + 1) as f64);
        for (p, &x) in path.iter_mut().zip(d) {
            p.0[i + 1] = x * inv_fact;
        }
    }
    evaluator.eval(&path)
}

/// `dⁱf/dtⁱ` for `i = 1..N−1` evaluated by double-double series arithmetic
/// directly on the constraint map; independent of the stored tensors.
pub fn df_dt_series<const N: usize>(jet: &TrajectoryJet, cj: &ConstraintJets) -> Vec<DVector<f64>> {
    use twofloat::TwoFloat;
    let derivs: Vec<Vec<TwoFloat>> = jet
        .derivs()
        .iter()
        .map(|d| d.iter().map(|&x| TwoFloat::from(x)).collect())
        .collect();
    let s = residual_series::<TwoFloat, N>(cj.evaluator(), cj.base().as_slice(), &derivs);
    (1..N)
        .map(|i| DVector::from_iterator(s.len(), s.iter().map(|r| r.derivative(i).to_f64())))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn third_order_partitions() {
        let p = enumerate_partitions(3);
        let got: Vec<(Vec<usize>, u128)> = p.iter().map(|p| (p.parts().to_vec(), p.coefficient())).collect();
        assert_eq!(got, vec![(vec![3], 1), (vec![2, 1], 3), (vec![1, 1, 1], 1)]);
        assert_eq!(p[1].multiplicities(), &[1, 1, 0]);
        assert_eq!(p[1].multinomial(), 6);
    }

    #[test]
    fn sixth_order_cubed_second_derivative() {
        let p = enumerate_partitions(6);
        let t = p.iter().find(|p| p.parts() == [2, 2, 2]).unwrap();
        assert_eq!(t.coefficient(), 15);
        assert_eq!(t.multinomial(), 120);
    }

    #[test]
    fn partition_tables_agree() {
        for i in 1..=EXPANDED_MAX {
            let mut general: Vec<(u128, Vec<usize>)> = enumerate_partitions(i)
                .iter()
                .map(|p| (p.coefficient(), p.parts().to_vec()))
                .collect();
            let mut written: Vec<(u128, Vec<usize>)> =
                EXPANDED[i - 1].iter().map(|(c, p)| (*c as u128, p.to_vec())).collect();
            general.sort();
            written.sort();
            assert_eq!(general, written, "order {i}");
        }
    }

    #[test]
    fn partition_counts() {
        let counts: Vec<usize> = (1..=10).map(|i| enumerate_partitions(i).len()).collect();
        assert_eq!(counts, vec![1, 2, 3, 5, 7, 11, 15, 22, 30, 42]);
    }

    #[test]
    fn reparametrize_second_and_fourth_entries() {
        let v = |x: f64| DVector::from_vec(vec![x, 2.0 * x]);
        let jet = TrajectoryJet::new(vec![v(1.0), v(0.5), v(-1.0), v(2.0)]).unwrap();
        let (c1, c2, c3) = (0.3, -0.7, 1.1);
        let r = jet.reparametrize(&[c1, c2, c3]);
        let (v1, v2, v3, v4) = (1.0, 0.5, -1.0, 2.0);
        assert!((r.derivs()[1][0] - (v2 + c1 * v1)).abs() < 1e-14);
        assert!((r.derivs()[2][0] - (v3 + 3.0 * c1 * v2 + c2 * v1)).abs() < 1e-14);
        let expect4 = v4 + 6.0 * c1 * v3 + (3.0 * c1 * c1 + 4.0 * c2) * v2 + c3 * v1;
        assert!((r.derivs()[3][0] - expect4).abs() < 1e-13);
    }

    #[test]
    fn normalization_is_orthogonal() {
        let jet = TrajectoryJet::new(vec![
            DVector::from_vec(vec![1.0, 1.0, 0.0]),
            DVector::from_vec(vec![0.2, -1.0, 3.0]),
            DVector::from_vec(vec![1.5, 0.5, -2.0]),
        ])
        .unwrap();
        let (n, c) = jet.normalized();
        assert_eq!(c.len(), 2);
        for d in &n.derivs()[1..] {
            assert!(d.dot(&jet.derivs()[0]).abs() < 1e-14);
        }
    }

    #[test]
    fn active_order_skips_zero_entries() {
        let z = DVector::zeros(2);
        let jet = TrajectoryJet::new(vec![z.clone(), z, DVector::from_vec(vec![0.0, 1.0])]).unwrap();
        assert_eq!(jet.active_order(), Some(3));
    }
}
