fn main() {
    std::process::exit(plaquette_cli::run(std::env::args_os()));
}
