#include <iostream>

#include "arclab/commands.h"

int main(int argc, char** argv) { return arclab::RunCli(argc, argv, std::cout, std::cerr); }
