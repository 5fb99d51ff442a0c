fn main() {
    std::process::exit(bubble_lab::cli::run(std::env::args_os()));
}
