#[path = "support/ed.rs"]
mod ed;

use ed::Ring;

#[test]
fn four_site_heisenberg_ring() {
    let e = Ring::dimerized(4, 0.0).ground_energy(50);
    assert!((e + 2.0).abs() < 1e-12, "{e}");
}

#[test]
fn decoupled_dimers() {
    // singlet energy -3/4 J with J = 2 on every strong bond
    let e = Ring::dimerized(8, 1.0).ground_energy(100);
    assert!((e + 4.0 * 1.5).abs() < 1e-12, "{e}");
}

#[test]
fn twelve_site_ring_matches_known_energy_per_site() {
    // uniform Heisenberg ring, N = 12: E0 / N = -0.4489492...
    let e = Ring::dimerized(12, 0.0).ground_energy(300) / 12.0;
    assert!((e + 0.448949).abs() < 1e-6, "{e}");
}
