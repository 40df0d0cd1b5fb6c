fn main() {
    let code = when2com::evalcli::cli_main(std::env::args_os());
    std::process::exit(code);
}
