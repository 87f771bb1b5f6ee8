fn main() {
    std::process::exit(ivpile::cli::run(std::env::args_os()));
}
