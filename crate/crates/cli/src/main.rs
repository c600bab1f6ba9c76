fn main() {
    std::process::exit(riffle_cli::run(std::env::args_os()));
}
