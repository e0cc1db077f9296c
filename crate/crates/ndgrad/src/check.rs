//! Finite-difference gradient checking.

use crate::{Array, NdError, Tape, Var};

/// Compare analytic gradients of a scalar-valued function against central
/// finite differences and return the worst relative error, defined per
/// element as |analytic - numeric| / max(1e-8, |numeric|).
///
/// `f` must be pure: it is re-evaluated on fresh tapes with perturbed copies
/// of `inputs` (step `h`, central differences).
pub fn grad_check<F>(f: F, inputs: &[Array], h: f64) -> Result<f64, NdError>
where
    F: Fn(&Tape, &[Var]) -> Result<Var, NdError>,
{
    let eval = |arrays: &[Array]| -> Result<f64, NdError> {
        let tape = Tape::new();
        let vars: Vec<Var> = arrays.iter().map(|a| tape.leaf(a.clone())).collect();
        let out = f(&tape, &vars)?;
        let v = tape.value(out);
        if !v.is_scalar() {
            return Err(NdError::NonScalarRoot { got: v.shape().to_vec() });
        }
        Ok(v.item())
    };

    // analytic pass
    let tape = Tape::new();
    let vars: Vec<Var> = inputs.iter().map(|a| tape.leaf(a.clone())).collect();
    let out = f(&tape, &vars)?;
    let grads = tape.backward(out)?;

    let mut worst: f64 = 0.0;
    for (i, input) in inputs.iter().enumerate() {
        let analytic = grads.get_or_zeros(vars[i], input.shape());
        for j in 0..input.len() {
            let mut plus = inputs.to_vec();
            plus[i].data_mut()[j] += h;
            let mut minus = inputs.to_vec();
            minus[i].data_mut()[j] -= h;
            let numeric = (eval(&plus)? - eval(&minus)?) / (2.0 * h);
            let rel = (analytic.data()[j] - numeric).abs() / numeric.abs().max(1e-8);
            worst = worst.max(rel);
        }
    }
    Ok(worst)
}

// Self-contained deterministic generator for check inputs (keeps the crate
// free of an RNG dependency). splitmix64.
fn next_u64(state: &mut u64) -> u64 {
    *state = state.wrapping_add(0x9e3779b97f4a7c15);
    let mut z = *state;
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58476d1ce4e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d049bb133111eb);
    z ^ (z >> 31)
}

fn uniform(state: &mut u64, lo: f64, hi: f64) -> f64 {
    let x = (next_u64(state) >> 11) as f64 / (1u64 << 53) as f64;
    lo + x * (hi - lo)
}

fn rand_array(state: &mut u64, shape: &[usize], lo: f64, hi: f64) -> Array {
    let n = shape.iter().product();
    let data = (0..n).map(|_| uniform(state, lo, hi)).collect();
    Array::from_vec(shape, data).unwrap()
}

/// Array of well-separated values (distinct multiples of 0.05, shuffled) so
/// finite differences cannot flip a top-k selection or a tie.
fn separated_array(state: &mut u64, shape: &[usize]) -> Array {
    let n: usize = shape.iter().product();
    let mut vals: Vec<f64> = (0..n).map(|i| (i as f64 - n as f64 / 2.0) * 0.05).collect();
    for i in (1..vals.len()).rev() {
        let j = (next_u64(state) % (i as u64 + 1)) as usize;
        vals.swap(i, j);
    }
    Array::from_vec(shape, vals).unwrap()
}

/// Run a finite-difference check on every operation in the catalog and
/// return (op name, worst relative error) per op. Step h = 1e-5; non-scalar
/// outputs are contracted against a fixed random probe so element mixups
/// cannot cancel out.
pub fn catalog_report(seed: u64) -> Result<Vec<(&'static str, f64)>, NdError> {
    let mut st = seed ^ 0xd1b5_4a32_d192_ed03;
    let h = 1e-5;
    let mut report = Vec::new();
    let mut run = |name: &'static str, worst: Result<f64, NdError>| -> Result<(), NdError> {
        report.push((name, worst?));
        Ok(())
    };

    // probe-contracted elementwise binary ops
    let a = rand_array(&mut st, &[4, 3], -1.5, 1.5);
    let b = rand_array(&mut st, &[4, 3], -1.5, 1.5);
    let probe = rand_array(&mut st, &[4, 3], -1.0, 1.0);
    {
        let p = probe.clone();
        run("add", grad_check(move |t, v| {
            let out = t.add(v[0], v[1])?;
            let pr = t.leaf(p.clone());
            Ok(t.sum(t.mul(out, pr)?))
        }, &[a.clone(), b.clone()], h))?;
    }
    {
        let p = probe.clone();
        run("sub", grad_check(move |t, v| {
            let out = t.sub(v[0], v[1])?;
            let pr = t.leaf(p.clone());
            Ok(t.sum(t.mul(out, pr)?))
        }, &[a.clone(), b.clone()], h))?;
    }
    {
        let p = probe.clone();
        run("mul", grad_check(move |t, v| {
            let out = t.mul(v[0], v[1])?;
            let pr = t.leaf(p.clone());
            Ok(t.sum(t.mul(out, pr)?))
        }, &[a.clone(), b.clone()], h))?;
    }
    {
        let p = probe.clone();
        run("add_scalar", grad_check(move |t, v| {
            let out = t.add_scalar(v[0], 0.37);
            let pr = t.leaf(p.clone());
            Ok(t.sum(t.mul(out, pr)?))
        }, &[a.clone()], h))?;
    }
    {
        let p = probe.clone();
        run("mul_scalar", grad_check(move |t, v| {
            let out = t.mul_scalar(v[0], -1.7);
            let pr = t.leaf(p.clone());
            Ok(t.sum(t.mul(out, pr)?))
        }, &[a.clone()], h))?;
    }

    // unary activations
    for (name, which) in [("exp", 0usize), ("sigmoid", 1), ("silu", 2), ("softplus", 3)] {
        let p = probe.clone();
        let x = rand_array(&mut st, &[4, 3], -2.0, 2.0);
        run(name, grad_check(move |t, v| {
            let out = match which {
                0 => t.exp(v[0]),
                1 => t.sigmoid(v[0]),
                2 => t.silu(v[0]),
                _ => t.softplus(v[0]),
            };
            let pr = t.leaf(p.clone());
            Ok(t.sum(t.mul(out, pr)?))
        }, &[x], h))?;
    }

    // matmul
    {
        let m1 = rand_array(&mut st, &[3, 4], -1.0, 1.0);
        let m2 = rand_array(&mut st, &[4, 2], -1.0, 1.0);
        let p = rand_array(&mut st, &[3, 2], -1.0, 1.0);
        run("matmul", grad_check(move |t, v| {
            let out = t.matmul(v[0], v[1])?;
            let pr = t.leaf(p.clone());
            Ok(t.sum(t.mul(out, pr)?))
        }, &[m1, m2], h))?;
    }

    // broadcast row add
    {
        let x = rand_array(&mut st, &[5, 3], -1.0, 1.0);
        let bias = rand_array(&mut st, &[3], -1.0, 1.0);
        let p = rand_array(&mut st, &[5, 3], -1.0, 1.0);
        run("add_row", grad_check(move |t, v| {
            let out = t.add_row(v[0], v[1])?;
            let pr = t.leaf(p.clone());
            Ok(t.sum(t.mul(out, pr)?))
        }, &[x, bias], h))?;
    }

    // convolutions, odd and even widths
    for (name, w) in [("conv1d_same_w3", 3usize), ("conv1d_same_w4", 4)] {
        let x = rand_array(&mut st, &[6, 2], -1.0, 1.0);
        let k = rand_array(&mut st, &[3, 2, w], -1.0, 1.0);
        let bias = rand_array(&mut st, &[3], -0.5, 0.5);
        let p = rand_array(&mut st, &[6, 3], -1.0, 1.0);
        run(name, grad_check(move |t, v| {
            let out = t.conv1d_same(v[0], v[1], v[2])?;
            let pr = t.leaf(p.clone());
            Ok(t.sum(t.mul(out, pr)?))
        }, &[x, k, bias], h))?;
    }
    {
        let x = rand_array(&mut st, &[7, 3], -1.0, 1.0);
        let k = rand_array(&mut st, &[3, 4], -1.0, 1.0);
        let bias = rand_array(&mut st, &[3], -0.5, 0.5);
        let p = rand_array(&mut st, &[7, 3], -1.0, 1.0);
        run("conv1d_causal_depthwise", grad_check(move |t, v| {
            let out = t.conv1d_causal_depthwise(v[0], v[1], v[2])?;
            let pr = t.leaf(p.clone());
            Ok(t.sum(t.mul(out, pr)?))
        }, &[x, k, bias], h))?;
    }

    // gather with a repeated index
    {
        let table = rand_array(&mut st, &[5, 3], -1.0, 1.0);
        let p = rand_array(&mut st, &[4, 3], -1.0, 1.0);
        run("gather", grad_check(move |t, v| {
            let out = t.gather(v[0], &[2, 0, 2, 4])?;
            let pr = t.leaf(p.clone());
            Ok(t.sum(t.mul(out, pr)?))
        }, &[table], h))?;
    }

    // concat / slice / reshape
    {
        let x = rand_array(&mut st, &[3], -1.0, 1.0);
        let y = rand_array(&mut st, &[4], -1.0, 1.0);
        let p = rand_array(&mut st, &[7], -1.0, 1.0);
        run("concat", grad_check(move |t, v| {
            let out = t.concat(v[0], v[1])?;
            let pr = t.leaf(p.clone());
            Ok(t.sum(t.mul(out, pr)?))
        }, &[x, y], h))?;
    }
    {
        let x = rand_array(&mut st, &[4, 6], -1.0, 1.0);
        let p = rand_array(&mut st, &[4, 3], -1.0, 1.0);
        run("slice_cols", grad_check(move |t, v| {
            let out = t.slice_cols(v[0], 2..5)?;
            let pr = t.leaf(p.clone());
            Ok(t.sum(t.mul(out, pr)?))
        }, &[x], h))?;
    }
    {
        let x = rand_array(&mut st, &[4, 6], -1.0, 1.0);
        let p = rand_array(&mut st, &[8, 3], -1.0, 1.0);
        run("reshape", grad_check(move |t, v| {
            let out = t.reshape(v[0], &[8, 3])?;
            let pr = t.leaf(p.clone());
            Ok(t.sum(t.mul(out, pr)?))
        }, &[x], h))?;
    }

    // reductions
    {
        let x = rand_array(&mut st, &[4, 3], -1.0, 1.0);
        run("sum", grad_check(|t, v| Ok(t.sum(v[0])), &[x.clone()], h))?;
        run("mean", grad_check(|t, v| Ok(t.mean(v[0])), &[x.clone()], h))?;
        let p0 = rand_array(&mut st, &[3], -1.0, 1.0);
        let p0b = p0.clone();
        run("sum_axis0", grad_check(move |t, v| {
            let out = t.sum_axis(v[0], 0)?;
            let pr = t.leaf(p0.clone());
            Ok(t.sum(t.mul(out, pr)?))
        }, &[x.clone()], h))?;
        run("mean_axis0", grad_check(move |t, v| {
            let out = t.mean_axis(v[0], 0)?;
            let pr = t.leaf(p0b.clone());
            Ok(t.sum(t.mul(out, pr)?))
        }, &[x.clone()], h))?;
        let p1 = rand_array(&mut st, &[4], -1.0, 1.0);
        let p1b = p1.clone();
        run("sum_axis1", grad_check(move |t, v| {
            let out = t.sum_axis(v[0], 1)?;
            let pr = t.leaf(p1.clone());
            Ok(t.sum(t.mul(out, pr)?))
        }, &[x.clone()], h))?;
        run("mean_axis1", grad_check(move |t, v| {
            let out = t.mean_axis(v[0], 1)?;
            let pr = t.leaf(p1b.clone());
            Ok(t.sum(t.mul(out, pr)?))
        }, &[x.clone()], h))?;
    }

    // top-k pooling over the masked prefix; separated values keep the
    // selection stable under the finite-difference step
    {
        let x = separated_array(&mut st, &[6, 3]);
        let p = rand_array(&mut st, &[3], -1.0, 1.0);
        run("topk_mean", grad_check(move |t, v| {
            let out = t.topk_mean(v[0], 2, 5)?;
            let pr = t.leaf(p.clone());
            Ok(t.sum(t.mul(out, pr)?))
        }, &[x], h))?;
    }

    // layer norm
    {
        let x = rand_array(&mut st, &[4, 5], -1.5, 1.5);
        let gain = rand_array(&mut st, &[5], 0.5, 1.5);
        let p = rand_array(&mut st, &[4, 5], -1.0, 1.0);
        run("layer_norm", grad_check(move |t, v| {
            let out = t.layer_norm(v[0], v[1], 1e-5)?;
            let pr = t.leaf(p.clone());
            Ok(t.sum(t.mul(out, pr)?))
        }, &[x, gain], h))?;
    }

    // weighted sigmoid cross-entropy
    {
        let z = rand_array(&mut st, &[6], -2.0, 2.0);
        let targets = vec![1.0, 0.0, 1.0, 1.0, 0.0, 0.0];
        let weights = vec![1.0, 2.5, 0.5, 1.0, 3.0, 1.0];
        run("bce_logits_mean", grad_check(move |t, v| {
            t.bce_logits_mean(v[0], &targets, &weights)
        }, &[z], h))?;
    }

    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn quadratic_passes() {
        let f = |tape: &Tape, vars: &[Var]| {
            let sq = tape.mul(vars[0], vars[0])?;
            Ok(tape.sum(sq))
        };
        let worst = grad_check(f, &[Array::vector(&[0.3, -1.2, 2.0])], 1e-5).unwrap();
        assert!(worst < 1e-6, "worst rel err {worst}");
    }

    #[test]
    fn broken_gradient_is_caught() {
        // forward computes x^2 but a custom op lies about the backward
        let f = |tape: &Tape, vars: &[Var]| {
            let x = vars[0];
            let v = tape.value(x);
            let out = v.map(|e| e * e);
            let y = tape.custom_op(out, move |g, vals| {
                let vx = vals.get(x);
                // wrong: claims d/dx x^2 = 3x
                let data = g.data().iter().zip(vx.data()).map(|(gi, xi)| gi * 3.0 * xi).collect();
                vec![(x, Array::from_vec(vx.shape(), data).unwrap())]
            });
            Ok(tape.sum(y))
        };
        let worst = grad_check(f, &[Array::vector(&[0.7, -0.4])], 1e-5).unwrap();
        assert!(worst > 0.1, "expected a large error, got {worst}");
    }
}
