fn main() {
    std::process::exit(ruin2d_cli::run(std::env::args_os().collect()));
}
