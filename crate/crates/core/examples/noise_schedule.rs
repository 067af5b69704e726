//! The forward noising process and the posterior it induces.

use doclayout::diffusion::{NoiseSchedule, ScheduleKind};
use ndarray::Array1;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn main() -> doclayout::Result<()> {
    for kind in [ScheduleKind::Sqrt, ScheduleKind::Linear] {
        let s = NoiseSchedule::new(kind, 2000)?;
        print!("{kind:?}:");
        for t in [1, 10, 100, 500, 1000, 1500, 2000] {
            print!("  abar[{t}]={:.4}", s.alpha_bar(t));
        }
        println!();
    }

    let s = NoiseSchedule::new(ScheduleKind::Sqrt, 2000)?;
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    let x0 = Array1::from_elem(10_000, 1.0);
    for t in [1, 1000, 2000] {
        let xt = s.q_sample(x0.view(), t, &mut rng)?;
        let mean = xt.mean().unwrap();
        let var = xt.var(1.0);
        println!(
            "t={t:>4}: mean {mean:.4} (expect {:.4})  var {var:.4} (expect {:.4})",
            s.alpha_bar(t).sqrt(),
            1.0 - s.alpha_bar(t)
        );
    }

    let t = 500;
    let (c0, ct) = s.posterior_coeffs(t)?;
    let mu = s.posterior_mean(Array1::from_elem(1, 0.3).view(), Array1::from_elem(1, 1.0).view(), t)?;
    println!("posterior at t={t}: {c0:.5} * x0 + {ct:.5} * x_t = {:.5}, variance {:.3e}", mu[0], s.posterior_variance(t)?);
    Ok(())
}
