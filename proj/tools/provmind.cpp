#include "provmind/cli.hpp"

int main(int argc, char** argv) { return provmind::dispatch(argc, argv); }
