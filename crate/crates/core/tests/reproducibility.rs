use effspin::analysis::jeff_sweep;
use effspin::defect::{DefectProblem, DefectSpec};
use effspin::model::Abahc;
use effspin::vumps::{vumps, VumpsOptions};

fn man_made_rows() -> Vec<Vec<f64>> {
    let opts = VumpsOptions { bond: 4, tol: 1e-10, max_iter: 300, seed: 3 };
    let h = Abahc::new(0.3, 0.0).unwrap().uniform_pair();
    let r = vumps(h.as_ref(), Abahc::cell_dims(), &opts).unwrap();
    let xi = r.state.correlation_length().unwrap();
    let p = DefectProblem::new(r.state, Abahc::new(0.3, 1e-3).unwrap(), DefectSpec::weak_weak(), 1e-12).unwrap();
    let b = p.solve_center(1).unwrap().tensors.remove(0);
    jeff_sweep(&p, &b, &[2, 3, 4, 5, 6], 20, None, xi).unwrap().rows
}

#[test]
fn man_made_jeff_is_bitwise_reproducible() {
    let a = man_made_rows();
    let b = man_made_rows();
    assert_eq!(a.len(), 5);
    for (x, y) in a.iter().zip(&b) {
        let xb: Vec<u64> = x.iter().map(|v| v.to_bits()).collect();
        let yb: Vec<u64> = y.iter().map(|v| v.to_bits()).collect();
        assert_eq!(xb, yb);
    }
}
