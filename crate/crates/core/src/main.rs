fn main() {
    std::process::exit(ripcert::cli::main_with(std::env::args_os()));
}
