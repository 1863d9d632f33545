fn main() {
    std::process::exit(spanprobe::cli::main_with_args(std::env::args_os()));
}
