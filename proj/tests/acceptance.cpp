#include "pifield/pifield.hpp"
int main() { return 0; }
