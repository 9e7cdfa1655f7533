//! Shared helpers for the acceptance suite: the pass/fail report line and a
//! generated stand-in for the UCI HAR training split.

use std::io::Write;
use std::path::{Path, PathBuf};

use rand::Rng;
use rand_distr::StandardNormal;

/// One line per criterion, printed whether it passed or not; run the suite
/// with `--nocapture` to see them as they happen.
pub fn report(number: u32, name: &str, pass: bool) {
    println!("ACCEPTANCE {number:02} {name}: {}", if pass { "PASS" } else { "FAIL" });
}

/// Row counts per activity label 1..=6 in the generated fixture; chosen so
/// the two binary tasks see the same class sizes as the real training split
/// (moving 1+2+3 = 3285, static 4+5+6 = 4067, upstairs 1073, downstairs 986).
pub const HAR_ACTIVITY_COUNTS: [usize; 6] = [1226, 1073, 986, 1286, 1374, 1407];

/// Feature/label files shaped like the UCI HAR training split. If
/// `SEQDET_HAR_DIR` points at a directory containing the real
/// `X_train.txt`/`y_train.txt`, those are used; otherwise a deterministic
/// fixture is generated under `dir`: 7352 rows of 561 features in [-1, 1],
/// with class structure in the first three columns only (column 1 separates
/// moving from static, column 2 separates upstairs from downstairs, column 3
/// carries a mild activity gradient) and pure noise elsewhere.
pub fn har_fixture(dir: &Path) -> (PathBuf, PathBuf) {
    if let Ok(root) = std::env::var("SEQDET_HAR_DIR") {
        let root = PathBuf::from(root);
        return (root.join("X_train.txt"), root.join("y_train.txt"));
    }
    let x_path = dir.join("X_train.txt");
    let y_path = dir.join("y_train.txt");

    let mut labels: Vec<u8> = Vec::new();
    for (i, &count) in HAR_ACTIVITY_COUNTS.iter().enumerate() {
        labels.extend(std::iter::repeat_n(i as u8 + 1, count));
    }
    let mut rng = seqdet::rng::rng_from(20_240_561, &[]);
    for i in (1..labels.len()).rev() {
        let j = rng.random_range(0..=i);
        labels.swap(i, j);
    }

    let mut fx = std::io::BufWriter::new(std::fs::File::create(&x_path).unwrap());
    let mut fy = std::io::BufWriter::new(std::fs::File::create(&y_path).unwrap());
    let mut row = String::with_capacity(561 * 16);
    for &a in &labels {
        writeln!(fy, "{a}").unwrap();
        row.clear();
        for c in 0..561u32 {
            let noise: f64 = rng.sample(StandardNormal);
            let mean = match c {
                0 => {
                    if a <= 3 {
                        0.3
                    } else {
                        -0.3
                    }
                }
                1 => match a {
                    2 => 0.4,
                    3 => -0.4,
                    _ => 0.0,
                },
                2 => 0.1 * (f64::from(a) - 3.5),
                _ => 0.0,
            };
            let v = (mean + 0.35 * noise).clamp(-1.0, 1.0);
            if c > 0 {
                row.push(' ');
            }
            row.push_str(&format!("{v:.7e}"));
        }
        writeln!(fx, "{row}").unwrap();
    }
    (x_path, y_path)
}
