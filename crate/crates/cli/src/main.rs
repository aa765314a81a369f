use std::io::Write;

use metriq_cli::run::{run, DEPTH_ENV};

// Proof trees from long saturation chains nest deeply.
const STACK: usize = 512 << 20;

fn main() {
    let out = std::thread::Builder::new()
        .stack_size(STACK)
        .spawn(|| run(std::env::args_os(), std::env::var(DEPTH_ENV).ok().as_deref()))
        .expect("spawn worker")
        .join()
        .expect("worker panicked");
    print!("{}", out.stdout);
    eprint!("{}", out.stderr);
    std::io::stdout().flush().ok();
    std::process::exit(out.code);
}
