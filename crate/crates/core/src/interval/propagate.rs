//! Forward/backward bounds propagation over a model's equations.
//!
//! Each derived variable `v = clip(e, R)` is one constraint. Revising it
//! evaluates `e` forward over the current bounds, narrows `v`, then pushes
//! the narrowed `v` back through `e` to narrow its operands. Constraints are
//! kept in a FIFO worklist and re-queued when a variable they mention
//! changes by more than the tolerance.

use std::collections::VecDeque;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::expr::Model;

use super::{Interval, Rounding};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PropagationSettings {
    /// A bound change counts when it exceeds `max(abs_tol, rel_tol * |bound|)`.
    pub abs_tol: f64,
    pub rel_tol: f64,
    pub rounding: Rounding,
    /// Hard cap on constraint revisions per call.
    pub max_revisions: usize,
}

impl Default for PropagationSettings {
    fn default() -> Self {
        PropagationSettings {
            abs_tol: 1e-9,
            rel_tol: 1e-7,
            rounding: Rounding::Outward,
            max_revisions: 10_000,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("bounds on `{name}` became empty")]
pub struct Contradiction {
    pub var: usize,
    pub name: String,
}

/// One interval per model variable, indexed like [`Model::names`].
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct BoundsStore {
    values: Vec<Interval>,
}

impl BoundsStore {
    /// Inputs from `region`; derived variables from their declared range.
    pub fn new(model: &Model, region: &[Interval]) -> BoundsStore {
        assert_eq!(region.len(), model.n_inputs(), "region dimension mismatch");
        let mut values = region.to_vec();
        values.extend(model.derived().iter().map(|d| d.range.unwrap_or(Interval::ENTIRE)));
        BoundsStore { values }
    }

    pub fn values(&self) -> &[Interval] {
        &self.values
    }

    pub fn get(&self, var: usize) -> Interval {
        self.values[var]
    }

    pub fn set(&mut self, var: usize, v: Interval) {
        self.values[var] = v;
    }

    pub fn into_values(self) -> Vec<Interval> {
        self.values
    }
}

fn significant(old: Interval, new: Interval, s: &PropagationSettings) -> bool {
    let moved = |o: f64, n: f64| {
        if o == n {
            return false;
        }
        if o.is_infinite() {
            return true;
        }
        (n - o).abs() > s.abs_tol.max(s.rel_tol * o.abs())
    };
    moved(old.lo(), new.lo()) || moved(old.hi(), new.hi())
}

/// The set of values `e` with `clip(e, range)` in `y`.
fn unclip(y: Interval, range: Interval) -> Interval {
    let lo = if y.lo() > range.lo() { y.lo() } else { f64::NEG_INFINITY };
    let hi = if y.hi() < range.hi() { y.hi() } else { f64::INFINITY };
    Interval::new(lo, hi)
}

/// Narrows `store` to a fixpoint of the model's constraints.
///
/// The result is contained in `store` variable by variable, and contains
/// every assignment consistent with the model and with `store`.
pub fn propagate(
    model: &Model,
    store: &BoundsStore,
    settings: &PropagationSettings,
) -> Result<BoundsStore, Contradiction> {
    let derived = model.derived();
    let mut values = store.values.clone();
    let r = settings.rounding;

    // constraints mentioning each variable
    let mut watchers: Vec<Vec<usize>> = vec![Vec::new(); values.len()];
    for (k, d) in derived.iter().enumerate() {
        watchers[d.var].push(k);
        for v in d.tape().variables() {
            watchers[v].push(k);
        }
    }

    // Revising a constraint in which some variable occurs twice is not
    // idempotent, so such constraints may need another pass of their own.
    let repeats: Vec<bool> = derived.iter().map(|d| d.tape().repeats_variable()).collect();

    let mut queue: VecDeque<usize> = (0..derived.len()).collect();
    let mut queued = vec![true; derived.len()];
    let mut buf = Vec::new();
    let mut revisions = 0usize;
    let contradiction = |var: usize| Contradiction {
        var,
        name: model.names()[var].clone(),
    };

    while let Some(k) = queue.pop_front() {
        queued[k] = false;
        if revisions >= settings.max_revisions {
            break;
        }
        revisions += 1;

        let d = &derived[k];
        let range = d.range.unwrap_or(Interval::ENTIRE);
        let e = d.tape().eval_interval(&values, r, &mut buf);
        let v_new = values[d.var]
            .intersect(e.clamp_to(range))
            .ok_or_else(|| contradiction(d.var))?;
        if !d.tape().backward(unclip(v_new, range), r, &mut buf) {
            return Err(contradiction(d.var));
        }

        let mut updates: Vec<(usize, Interval)> = Vec::with_capacity(d.tape().var_slots().len() + 1);
        updates.push((d.var, v_new));
        for &(slot, var) in d.tape().var_slots() {
            updates.push((var, buf[slot as usize]));
        }
        for (var, new) in updates {
            let old = values[var];
            let new = old.intersect(new).ok_or_else(|| contradiction(var))?;
            if significant(old, new, settings) {
                for &w in &watchers[var] {
                    if (w != k || repeats[k]) && !queued[w] {
                        queued[w] = true;
                        queue.push_back(w);
                    }
                }
            }
            values[var] = new;
        }
    }
    Ok(BoundsStore { values })
}

#[cfg(test)]
mod tests {
    use super::*;

    const PVR: &str = "input PAP in [1.0, 88.0]\ninput LAP in [1.0, 88.0]\ninput CO in [1.0, 100]\nPVR = (PAP - LAP)/CO in [0, inf]";

    fn run(model: &Model, store: &BoundsStore) -> BoundsStore {
        propagate(model, store, &PropagationSettings::default()).unwrap()
    }

    #[test]
    fn full_pvr_box() {
        let m = Model::parse(PVR).unwrap();
        let s = run(&m, &BoundsStore::new(&m, m.input_ranges()));
        assert_eq!(s.get(3), Interval::new(0.0, 87.0));
        // nothing to learn about the inputs
        assert_eq!(&s.values()[..3], m.input_ranges());
    }

    #[test]
    fn backward_rule_on_sum() {
        let m = Model::parse("input a in [0, 1]\ninput b in [0, 2]\ns = a + b").unwrap();
        let mut st = BoundsStore::new(&m, m.input_ranges());
        st.set(2, Interval::new(1.5, 3.0));
        let out = run(&m, &st);
        assert_eq!(out.get(1), Interval::new(0.5, 2.0));
        assert_eq!(out.get(0), Interval::new(0.0, 1.0));
    }

    #[test]
    fn chained_constraints_reach_fixpoint() {
        // y = 2x, z = y + 1 with z known in [3, 4] gives x in [1, 1.5]
        let m = Model::parse("input x in [0, 10]\ny = 2*x\nz = y + 1").unwrap();
        let mut st = BoundsStore::new(&m, m.input_ranges());
        st.set(2, Interval::new(3.0, 4.0));
        let out = run(&m, &st);
        assert_eq!(out.get(0), Interval::new(1.0, 1.5));
        assert_eq!(out.get(1), Interval::new(2.0, 3.0));
    }

    #[test]
    fn infeasible_store_is_a_contradiction() {
        let m = Model::parse("input x in [0, 1]\ny = exp(x)").unwrap();
        let mut st = BoundsStore::new(&m, m.input_ranges());
        st.set(1, Interval::new(10.0, 20.0));
        let err = propagate(&m, &st, &PropagationSettings::default()).unwrap_err();
        assert_eq!(err.name, "y");
    }

    #[test]
    fn clipping_is_not_a_constraint() {
        // y is clipped into [0, 1]; that says nothing about x
        let m = Model::parse("input x in [-5, 5]\ny = x in [0, 1]").unwrap();
        let out = run(&m, &BoundsStore::new(&m, m.input_ranges()));
        assert_eq!(out.get(0), Interval::new(-5.0, 5.0));
        assert_eq!(out.get(1), Interval::new(0.0, 1.0));
    }

    #[test]
    fn unclip_inverts_clip() {
        let r = Interval::NONNEGATIVE;
        assert_eq!(unclip(Interval::new(0.0, 87.0), r), Interval::new(f64::NEG_INFINITY, 87.0));
        assert_eq!(unclip(Interval::new(2.0, 3.0), r), Interval::new(2.0, 3.0));
    }
}
