fn main() {
    std::process::exit(fq_circle_cli::main_with_args(std::env::args_os()));
}
