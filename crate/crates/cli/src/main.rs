fn main() {
    std::process::exit(quadrica::main_with_args(std::env::args_os()));
}
