fn main() {
    eprintln!("srgkit: not yet wired");
    std::process::exit(1);
}
