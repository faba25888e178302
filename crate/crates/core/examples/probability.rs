//! Exact and approximate falsification probabilities for a few path shapes.
//!
//! cargo run --example probability -- 4 100

use dashu_base::BitTest;
use merkle_falsify::report::format_real;
use merkle_falsify::{approximation_error, PathParams};

fn main() -> merkle_falsify::Result<()> {
    let args: Vec<u64> = std::env::args().skip(1).filter_map(|a| a.parse().ok()).collect();
    let shapes = match args[..] {
        [b, m] => vec![(b as u32, m)],
        _ => vec![(2, 10), (8, 100), (16, 1000), (64, 1_000_000), (256, 1_000_000)],
    };
    for (bits, path_len) in shapes {
        let e = approximation_error(PathParams::new(bits, path_len)?);
        println!("b={bits} m={path_len}");
        println!("  exact   {}", format_real(&e.exact.value));
        println!("  1-exact {}", format_real(&e.exact.complement));
        println!("  approx  {}", format_real(&e.approx.value));
        if let Some(q) = &e.exact.exact_rational {
            println!("  rational with {}-bit denominator", q.denominator().bit_len());
        }
    }
    Ok(())
}
