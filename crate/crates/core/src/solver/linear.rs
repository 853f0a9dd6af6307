use crate::fields::WaveField;

use super::{Evolution, Solver, SolverError};

/// Source callback: fills `f` at time step `n`.
pub type Source<'a> = &'a (dyn Fn(usize, &mut [f64]) + Sync);

/// Linear run `P u + q u = f` with the given data (zero when absent). With
/// zero data this realizes the causal solve `Q(f)`.
pub fn solve_linear(
    solver: &Solver,
    initial: Option<(&[f64], &[f64])>,
    source: Option<Source<'_>>,
    q: Option<&[f64]>,
) -> Result<WaveField, SolverError> {
    let n = solver.op.len();
    let zeros = vec![0.0; n];
    let (u0, u1) = initial.unwrap_or((&zeros, &zeros));
    let mut f = vec![0.0; n];
    let extra0 = source.map(|s| {
        s(0, &mut f);
        f.clone()
    });
    let mut ev = Evolution::new(solver, u0, u1, q, extra0.as_deref());
    while !ev.done() {
        match source {
            Some(s) => {
                s(ev.step_index(), &mut f);
                ev.step(Some(&f))?;
            }
            None => ev.step(None)?,
        }
    }
    Ok(ev.finish())
}
