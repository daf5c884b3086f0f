fn main() {
    std::process::exit(hmbandit_cli::run(std::env::args_os()));
}
