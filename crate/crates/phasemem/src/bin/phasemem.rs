fn main() {
    let code = phasemem::cli::execute(std::env::args());
    std::process::exit(code);
}
