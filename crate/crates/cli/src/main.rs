fn main() {
    std::process::exit(audiotok_cli::run(std::env::args_os().collect()));
}
