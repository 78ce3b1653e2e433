//! Closed-form perturbative terms T^{ε₁ε₂}_k(E) of the one-particle
//! T-operator, summed term by term as an independent path to t^{ε₁ε₂}(E).

use num_complex::Complex64;

use super::Pair;
use crate::bath::Channel;
use crate::error::Result;
use crate::linalg::{dagger, frobenius, zeros, CMat};
use crate::model::Model;

/// Whether a slot in the operator word carries D or D†.
#[derive(Clone, Copy, PartialEq, Eq)]
enum Slot {
    D,
    Dag,
}

impl Slot {
    fn flip(self) -> Slot {
        match self {
            Slot::D => Slot::Dag,
            Slot::Dag => Slot::D,
        }
    }

    fn sign(self) -> f64 {
        match self {
            Slot::D => 1.0,
            Slot::Dag => -1.0,
        }
    }

    fn channel(self) -> Channel {
        match self {
            Slot::D => Channel::Zero,
            Slot::Dag => Channel::One,
        }
    }
}

struct Word<'a> {
    model: &'a Model,
    energy: f64,
    slots: Vec<Slot>,
    active: Vec<f64>,
    d_blocks: Vec<CMat>,
    dag_blocks: Vec<CMat>,
    prune: f64,
}

impl Word<'_> {
    /// Σ over slots j..1 of X_{a_j}…X_{a_m} with their γ weights; `partial`
    /// already holds the product of slots j+1..m and `shift` = Σ_{i>j} σ_i a_i.
    fn descend(&self, j: usize, partial: &CMat, shift: f64, weight: Complex64, out: &mut CMat) -> Result<()> {
        if j == 0 {
            *out += partial * weight;
            return Ok(());
        }
        let slot = self.slots[j - 1];
        for (k, &a) in self.active.iter().enumerate() {
            let x = match slot {
                Slot::D => &self.d_blocks[k],
                Slot::Dag => &self.dag_blocks[k],
            };
            let next = x * partial;
            if frobenius(&next) <= self.prune {
                continue;
            }
            let s = shift + slot.sign() * a;
            let g = self.model.bath.gamma(slot.channel(), self.energy + s)?;
            if g == Complex64::new(0.0, 0.0) {
                continue;
            }
            self.descend(j - 1, &next, s, weight * g, out)?;
        }
        Ok(())
    }
}

/// The term T^{pair}_k(E). Diagonal pairs have only even k ≥ 2, off-diagonal
/// pairs only odd k ≥ 1; other orders return zero.
pub fn series_term(model: &Model, pair: Pair, k: usize, e: f64) -> Result<CMat> {
    let dim = model.dim();
    let parity_ok = if pair.is_diagonal() { k >= 2 && k.is_multiple_of(2) } else { k % 2 == 1 };
    if !parity_ok {
        return Ok(zeros(dim));
    }
    let lead = match pair {
        Pair::P00 | Pair::P01 => Slot::D,
        Pair::P11 | Pair::P10 => Slot::Dag,
    };
    let half = (k / 2) as i32;
    let coeff = if pair.is_diagonal() {
        Complex64::new((-1f64).powi(half), 0.0)
    } else {
        Complex64::new(0.0, -(-1f64).powi(half))
    };
    let m = k - 1;
    let mut slots = Vec::with_capacity(m);
    let mut s = lead.flip();
    for _ in 0..m {
        slots.push(s);
        s = s.flip();
    }
    let sp = &model.spectral;
    let active = sp.active_frequencies();
    let d_blocks: Vec<CMat> = active.iter().map(|&a| sp.d(a).expect("active block").clone()).collect();
    let dag_blocks: Vec<CMat> = d_blocks.iter().map(dagger).collect();
    let dnorm = frobenius(&model.spec.coupling);
    let word = Word {
        model,
        energy: e,
        slots,
        active,
        d_blocks,
        dag_blocks,
        prune: 1e-14 * dnorm.powi(m as i32).max(f64::MIN_POSITIVE),
    };
    let mut tail = zeros(dim);
    word.descend(m, &crate::linalg::identity(dim), 0.0, coeff, &mut tail)?;
    let lead_op = match lead {
        Slot::D => model.spec.coupling.clone(),
        Slot::Dag => model.spec.coupling.adjoint(),
    };
    Ok(lead_op * tail)
}

/// Partial sums of Σ_k T^{pair}_k(E) over the orders allowed for the pair.
#[derive(Clone, Debug)]
pub struct PerturbativeSeries {
    pub pair: Pair,
    pub energy: f64,
    /// Orders k included, ascending.
    pub orders: Vec<usize>,
    pub terms: Vec<CMat>,
    pub partial_sums: Vec<CMat>,
    /// First order whose term fell below the tolerance, if any.
    pub converged_at: Option<usize>,
}

/// Sum terms until one has Frobenius norm below `tol` or `max_order` is passed.
pub fn series_partial_sums(model: &Model, pair: Pair, e: f64, tol: f64, max_order: usize) -> Result<PerturbativeSeries> {
    let mut k = if pair.is_diagonal() { 2 } else { 1 };
    let mut series = PerturbativeSeries {
        pair,
        energy: e,
        orders: Vec::new(),
        terms: Vec::new(),
        partial_sums: Vec::new(),
        converged_at: None,
    };
    let mut acc = zeros(model.dim());
    while k <= max_order {
        let term = series_term(model, pair, k, e)?;
        acc += &term;
        let inc = frobenius(&term);
        series.orders.push(k);
        series.terms.push(term);
        series.partial_sums.push(acc.clone());
        if inc < tol {
            series.converged_at = Some(k);
            break;
        }
        k += 2;
    }
    Ok(series)
}
