fn main() {
    std::process::exit(finreg_cli::run(std::env::args_os()));
}
