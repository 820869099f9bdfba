//! Central finite-difference checks of tape gradients.

use super::{ParameterSet, Tape, TensorError, Var};

/// Outcome of a gradient check: the largest relative error found and the
/// parameter entry it belongs to.
#[derive(Clone, Debug, PartialEq)]
pub struct GradCheck {
    pub max_relative_error: f64,
    pub worst: Option<(String, usize)>,
    pub checked: usize,
}

/// Relative error `|a − b| / max(|a|, |b|, floor)`.
pub fn relative_error(a: f64, b: f64, floor: f64) -> f64 {
    (a - b).abs() / a.abs().max(b.abs()).max(floor)
}

/// Compares reverse-mode gradients of the scalar produced by `loss` against
/// central differences with step `h`, entry by entry over every parameter.
pub fn check_gradients<E>(
    params: &ParameterSet<f64>,
    h: f64,
    floor: f64,
    loss: impl Fn(&mut Tape<'_, f64>) -> Result<Var, E>,
) -> Result<GradCheck, E>
where
    E: From<TensorError>,
{
    let analytic = {
        let mut tape = Tape::with_params(params);
        let l = loss(&mut tape)?;
        tape.backward(l)?
    };
    let eval = |p: &ParameterSet<f64>| -> Result<f64, E> {
        let mut tape = Tape::with_params(p);
        let l = loss(&mut tape)?;
        Ok(tape.value(l).item())
    };
    let mut work = params.clone();
    let mut out = GradCheck {
        max_relative_error: 0.0,
        worst: None,
        checked: 0,
    };
    let names: Vec<String> = params.names().map(str::to_string).collect();
    for name in names {
        let n = params.value(&name).expect("listed").len();
        let grad = analytic
            .get(&name)
            .expect("every parameter has a gradient")
            .clone();
        for i in 0..n {
            let orig = work.value(&name).expect("listed").data()[i];
            work.value_mut(&name).expect("listed").data_mut()[i] = orig + h;
            let up = eval(&work)?;
            work.value_mut(&name).expect("listed").data_mut()[i] = orig - h;
            let down = eval(&work)?;
            work.value_mut(&name).expect("listed").data_mut()[i] = orig;
            let numeric = (up - down) / (2.0 * h);
            let err = relative_error(grad.data()[i], numeric, floor);
            out.checked += 1;
            if err > out.max_relative_error {
                out.max_relative_error = err;
                out.worst = Some((name.clone(), i));
            }
        }
    }
    Ok(out)
}
