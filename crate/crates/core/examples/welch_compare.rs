//! Mean, standard error and a one-sided Welch test on two small groups.

use advpol::harness::{mean, sem, welch_t_one_sided};

fn main() -> advpol::Result<()> {
    let white_box = [0.42, 0.55, 0.61, 0.38, 0.50];
    let black_box = [0.31, 0.44, 0.29, 0.35, 0.40];
    for (name, g) in [("white_box", &white_box[..]), ("black_box", &black_box[..])] {
        println!("{name}: mean {:.4} sem {:.4}", mean(g), sem(g)?);
    }
    let w = welch_t_one_sided(&white_box, &black_box)?;
    println!("H1 white_box > black_box: t {:.4}, df {:.3}, p {:.5}", w.t, w.df, w.p);
    let r = welch_t_one_sided(&black_box, &white_box)?;
    println!("reversed hypothesis: p {:.5} (sums to {:.1})", r.p, w.p + r.p);
    match sem(&[1.0]) {
        Err(e) => println!("single sample: {e}"),
        Ok(s) => println!("single sample sem {s}"),
    }
    Ok(())
}
