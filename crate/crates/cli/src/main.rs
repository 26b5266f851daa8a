fn main() {
    std::process::exit(gsd_tail_cli::run(std::env::args_os()));
}
