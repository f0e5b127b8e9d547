fn main() {
    eprintln!("fsi2d: command-line driver not wired up yet");
    std::process::exit(2);
}
