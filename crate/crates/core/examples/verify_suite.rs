//! The property suite behind `ecfm verify`.

fn main() {
    for c in ecfm::verify::run_all() {
        println!("{} {:<28} {}", if c.passed { "ok  " } else { "FAIL" }, c.name, c.detail);
    }
}
