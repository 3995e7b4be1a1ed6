fn main() {
    std::process::exit(riesz_rpo::cli::run(std::env::args_os()));
}
