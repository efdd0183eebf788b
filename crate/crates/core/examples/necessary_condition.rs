//! The necessary condition for cubic non-convergence on a constructed state
//! and on two perturbed copies.

use nonlocal_flow::analysis::check_necessary_condition;
use nonlocal_flow::constructors::*;
use nonlocal_flow::exact::Weight;
use nonlocal_flow::state::{AtomicState, LevelSlot};

fn shift(st: &AtomicState, d: f64) -> AtomicState {
    let mut atoms = st.atoms().to_vec();
    for a in &mut atoms {
        if let LevelSlot::Active { value } = &mut a.slot {
            *value += d;
        }
    }
    AtomicState::new(st.nonlinearity_arc(), atoms).unwrap()
}

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let spec = CubicSpec {
        eta: Weight::fraction(1, 8),
        mu0: Weight::fraction(1, 10),
        alpha0: 0.5,
        theta: Weight::fraction(1, 64),
        k: 3,
        alpha: AlphaSchedule::default(),
        strictness: Strictness::Ordering,
        subatoms: 4,
    };
    let st = build_cubic(&spec)?;
    println!("constructed ({} atoms): {:?}", st.len(), check_necessary_condition(&st)?);
    println!("mean shifted by 1e-3:  {:?}", check_necessary_condition(&shift(&st, 1e-3))?);

    let mut atoms = st.atoms().to_vec();
    let d = Weight::fraction(1, 1000);
    let last = atoms.len() - 1;
    atoms[0].weight = atoms[0].weight.sub(&d);
    atoms[last].weight = atoms[last].weight.add(&d);
    let moved = AtomicState::new(st.nonlinearity_arc(), atoms)?;
    let moved = shift(&moved, -moved.mean());
    println!("mass moved outward:    {:?}", check_necessary_condition(&moved)?);
    Ok(())
}
