// Dev probe: PDE-level confirmation of the shear blowup threshold.
// Integrate the pressureless system pseudo-spectrally (no closed form
// involved) and watch the velocity gradient at τ between the candidate
// thresholds 1/2 and 1.
use rotlab::spectral::{dealias, grad_linf, GradientFields};
use rotlab::{ScalarField, TorusGrid, VectorField};

fn rhs(u: &VectorField, tau: f64) -> VectorField {
    let g = GradientFields::of_unchecked(u);
    let ax = dealias(
        &u.x.mul(&g.dux)
            .unwrap()
            .add(&u.y.mul(&g.duy).unwrap())
            .unwrap(),
    );
    let ay = dealias(
        &u.x.mul(&g.dvx)
            .unwrap()
            .add(&u.y.mul(&g.dvy).unwrap())
            .unwrap(),
    );
    VectorField {
        x: ax.scale(-1.0).add(&u.y.scale(1.0 / tau)).unwrap(),
        y: ay.scale(-1.0).add(&u.x.scale(-1.0 / tau)).unwrap(),
    }
}

fn main() {
    let n = 128;
    let grid = TorusGrid::new(n).unwrap();
    for &tau in &[0.45_f64, 0.6, 0.9] {
        let mut u = VectorField::new(
            ScalarField::from_fn(grid, |_, y| y.sin()),
            ScalarField::zeros(grid),
        )
        .unwrap();
        let dt = 1e-3;
        let mut t = 0.0;
        let mut peak: f64 = 0.0;
        let mut peak_t = 0.0;
        let horizon = 2.0 * std::f64::consts::PI * tau;
        while t < horizon {
            let k1 = rhs(&u, tau);
            let mut u2 = u.clone();
            u2.axpy(0.5 * dt, &k1);
            let k2 = rhs(&u2, tau);
            let mut u3 = u.clone();
            u3.axpy(0.5 * dt, &k2);
            let k3 = rhs(&u3, tau);
            let mut u4 = u.clone();
            u4.axpy(dt, &k3);
            let k4 = rhs(&u4, tau);
            u.axpy(dt / 6.0, &k1);
            u.axpy(dt / 3.0, &k2);
            u.axpy(dt / 3.0, &k3);
            u.axpy(dt / 6.0, &k4);
            t += dt;
            if !u.is_finite() {
                println!("tau={tau}: NaN at t={t:.3}");
                break;
            }
            let g = grad_linf(&u).unwrap();
            if g > peak {
                peak = g;
                peak_t = t;
            }
            if g > 50.0 {
                println!("tau={tau}: gradient exceeded 50 at t={t:.3} (closed-form singular time would be {:?})",
                    rotlab::pressureless::first_singular_time(
                        rotlab::rotation::Mat2([[0.0, 1.0], [0.0, 0.0]]),
                        tau
                    ));
                break;
            }
        }
        println!("tau={tau}: peak grad {peak:.2} at t={peak_t:.3} over one period {horizon:.3}");
    }
}
