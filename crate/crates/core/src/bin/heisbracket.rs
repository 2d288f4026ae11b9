fn main() {
    std::process::exit(heisbracket::cli::main_with(std::env::args_os()));
}
