fn main() {
    std::process::exit(triadyn::simcli::main_with_args(std::env::args_os()));
}
