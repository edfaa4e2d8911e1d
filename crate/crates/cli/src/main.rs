fn main() {
    std::process::exit(blstm_cli::main_with_args(std::env::args_os()));
}
