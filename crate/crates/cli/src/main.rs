fn main() {
    std::process::exit(formbench_cli::dispatch(std::env::args_os()));
}
