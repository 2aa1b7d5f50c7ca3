//! Regenerate the bundled datasets under data/: the 2601-point reference
//! grid and the 50-point observed sample drawn from it.
//!
//! Run from the repository root: `cargo run -p ddt --example gen_data`

use std::io::Write;

use rand::Rng;
use rand::SeedableRng;

fn main() -> std::io::Result<()> {
    let (_, grid) = ddt::dataset::sim2d_grid();
    std::fs::create_dir_all("data")?;

    let mut f = std::fs::File::create("data/sim2d.csv")?;
    writeln!(f, "x1,x2,y")?;
    for (row, y) in grid.rows.iter().zip(&grid.responses) {
        writeln!(f, "{},{},{}", row[0], row[1], y)?;
    }

    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(42);
    let mut indices: Vec<usize> = (0..grid.len()).collect();
    for i in 0..50 {
        let j = rng.random_range(i..indices.len());
        indices.swap(i, j);
    }
    let mut f = std::fs::File::create("data/sim2d_sample50.csv")?;
    writeln!(f, "x1,x2,y")?;
    for &i in &indices[..50] {
        writeln!(f, "{},{},{}", grid.rows[i][0], grid.rows[i][1], grid.responses[i])?;
    }
    println!("wrote data/sim2d.csv (2601 rows) and data/sim2d_sample50.csv");
    Ok(())
}
