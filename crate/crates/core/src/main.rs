fn main() {
    std::process::exit(thz_sm::cli::main_with(std::env::args_os()));
}
