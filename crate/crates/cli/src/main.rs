fn main() {
    std::process::exit(semdiff_cli::run(std::env::args_os()));
}
