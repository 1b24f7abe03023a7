#include <cstdio>
int main() { std::puts("opack"); return 0; }
