//! Fixed-time signal plans derived from intersection geometry.
//!
//! One phase per approach axis: the two opposing sides share one green,
//! with all of their movements — lefts included — nominally green at once
//! (permissive phasing, the way single-lane grids are usually signalled).
//! A green never admits a vehicle into the box by itself: per-tick
//! admission still arbitrates conflicts, with through and right movements
//! taking priority, so a permitted left crosses only in gaps of the
//! opposing stream. Every phase is followed by an all-red clearance
//! interval that lets the box empty before the cross axis starts.

use crate::error::Result;
use crate::network::Intersection;

pub const GREEN_TICKS: u64 = 15;
pub const ALL_RED_TICKS: u64 = 3;

#[derive(Debug, Clone)]
pub struct SignalPlan {
    /// Green direction sets, in cycle order.
    phases: Vec<Vec<usize>>,
    period: u64,
}

impl SignalPlan {
    /// Directions with green at an absolute tick; empty during clearance.
    pub fn green_at(&self, tick: u64) -> &[usize] {
        const EMPTY: &[usize] = &[];
        let slot = GREEN_TICKS + ALL_RED_TICKS;
        let t = tick % self.period;
        let phase = (t / slot) as usize;
        if t % slot < GREEN_TICKS {
            &self.phases[phase]
        } else {
            EMPTY
        }
    }

    pub fn phases(&self) -> &[Vec<usize>] {
        &self.phases
    }
}

/// Build the plan for one intersection; `None` for uncontrolled nodes.
pub fn build_plan(inter: &Intersection) -> Result<Option<SignalPlan>> {
    if !inter.controlled {
        return Ok(None);
    }
    let mut phases: Vec<Vec<usize>> = Vec::new();
    for axis in [0usize, 1] {
        let dirs: Vec<usize> = inter
            .directions
            .iter()
            .enumerate()
            .filter(|(_, d)| d.side % 2 == axis)
            .map(|(j, _)| j)
            .collect();
        if !dirs.is_empty() {
            phases.push(dirs);
        }
    }
    let period = phases.len() as u64 * (GREEN_TICKS + ALL_RED_TICKS);
    Ok(Some(SignalPlan { phases, period }))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::network::{generate_grid, load_network, network_to_toml, IntersectionKind};

    #[test]
    fn four_way_greens_each_axis_in_full() {
        let doc = generate_grid(3, 3, 100.0, 13.9).unwrap();
        let g = load_network(&network_to_toml(&doc).unwrap()).unwrap();
        let inter = g
            .intersections()
            .iter()
            .find(|i| i.kind == IntersectionKind::FourWay)
            .unwrap();
        let plan = build_plan(inter).unwrap().expect("controlled");
        assert_eq!(plan.phases().len(), 2);
        // Every direction appears in exactly one phase, and each phase
        // holds one axis: opposing approaches share their green.
        let mut seen = vec![0u32; inter.j()];
        for phase in plan.phases() {
            let axis = inter.directions[phase[0]].side % 2;
            for &d in phase {
                seen[d] += 1;
                assert_eq!(inter.directions[d].side % 2, axis);
            }
        }
        assert!(seen.iter().all(|&c| c == 1));
    }

    #[test]
    fn cycle_alternates_green_and_clearance() {
        let doc = generate_grid(3, 3, 100.0, 13.9).unwrap();
        let g = load_network(&network_to_toml(&doc).unwrap()).unwrap();
        let inter = g
            .intersections()
            .iter()
            .find(|i| i.kind == IntersectionKind::FourWay)
            .unwrap();
        let plan = build_plan(inter).unwrap().unwrap();
        assert!(!plan.green_at(0).is_empty());
        assert!(plan.green_at(GREEN_TICKS).is_empty(), "clearance after green");
        assert_eq!(plan.green_at(0), plan.green_at(2 * (GREEN_TICKS + ALL_RED_TICKS)));
        // Consecutive phases show different greens.
        assert_ne!(plan.green_at(0), plan.green_at(GREEN_TICKS + ALL_RED_TICKS));
    }
}
