//! Finite-difference verification of the whole operation catalog, plus tape
//! behaviors that matter to training: determinism and graph reuse.

use ndgrad::{grad_check, Array, Tape, Var};

#[test]
fn every_catalog_op_passes_finite_difference_checks() {
    let report = ndgrad::check::catalog_report(20260822).unwrap();
    assert!(report.len() >= 25, "catalog shrank to {} ops", report.len());
    for (name, worst) in &report {
        assert!(worst < &1e-4, "op {name}: worst relative error {worst}");
    }
}

#[test]
fn catalog_report_is_deterministic() {
    let a = ndgrad::check::catalog_report(7).unwrap();
    let b = ndgrad::check::catalog_report(7).unwrap();
    for ((na, ea), (nb, eb)) in a.iter().zip(&b) {
        assert_eq!(na, nb);
        assert_eq!(ea.to_bits(), eb.to_bits());
    }
}

#[test]
fn gradients_are_bit_identical_across_runs() {
    let run = || {
        let tape = Tape::new();
        let x = tape.leaf(Array::matrix(3, 2, vec![0.3, -1.0, 2.0, 0.7, -0.2, 1.1]).unwrap());
        let w = tape.leaf(Array::matrix(2, 2, vec![0.5, -0.3, 0.8, 0.1]).unwrap());
        let h = tape.matmul(x, w).unwrap();
        let s = tape.silu(h);
        let loss = tape.mean(s);
        let grads = tape.backward(loss).unwrap();
        (
            grads.get(x).unwrap().data().to_vec(),
            grads.get(w).unwrap().data().to_vec(),
        )
    };
    let (gx1, gw1) = run();
    let (gx2, gw2) = run();
    let bits = |v: &[f64]| v.iter().map(|x| x.to_bits()).collect::<Vec<_>>();
    assert_eq!(bits(&gx1), bits(&gx2));
    assert_eq!(bits(&gw1), bits(&gw2));
}

#[test]
fn chained_graph_with_shared_subexpression_checks_out() {
    // f(x, w) = mean(silu(x*w) + sigmoid(x*w)) exercises fan-out through a
    // shared matmul node.
    let f = |t: &Tape, v: &[Var]| {
        let xw = t.matmul(v[0], v[1])?;
        let a = t.silu(xw);
        let b = t.sigmoid(xw);
        Ok(t.mean(t.add(a, b)?))
    };
    let x = Array::matrix(2, 3, vec![0.3, -0.8, 1.2, 0.05, 0.9, -1.4]).unwrap();
    let w = Array::matrix(3, 2, vec![0.2, 0.4, -0.6, 0.1, 0.7, -0.3]).unwrap();
    let worst = grad_check(f, &[x, w], 1e-5).unwrap();
    assert!(worst < 1e-6, "worst rel err {worst}");
}

#[test]
fn custom_op_participates_in_backward() {
    // y = 2x as a custom op, then loss = sum(y * y)
    let tape = Tape::new();
    let x = tape.leaf(Array::vector(&[1.0, -2.0]));
    let doubled = tape.value(x).map(|v| 2.0 * v);
    let y = tape.custom_op(doubled, move |g, _| vec![(x, g.map(|v| 2.0 * v))]);
    let yy = tape.mul(y, y).unwrap();
    let loss = tape.sum(yy);
    let grads = tape.backward(loss).unwrap();
    // d/dx sum((2x)^2) = 8x
    assert_eq!(grads.get(x).unwrap().data(), &[8.0, -16.0]);
}
