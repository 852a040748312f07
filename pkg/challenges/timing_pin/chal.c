/* PIN gate with a per-position early exit. The comparison loop bails
 * at the first wrong digit, so how far it got leaks through the exit
 * status (a stand-in for the timing difference a stopwatch would see).
 * One probe per digit position recovers the PIN in linear time. */
#include <stdio.h>
#include <string.h>

static const char PIN[] = "7351";

int main(int argc, char **argv) {
    if (argc < 2) {
        puts("usage: chal <pin>");
        return 0;
    }
    const char *guess = argv[1];
    int matched = 0;
    for (int i = 0; i < 4; i++) {
        if (guess[i] != PIN[i])
            break;  /* early exit: the side channel */
        matched++;
    }
    if (matched == 4 && guess[4] == '\0') {
        puts("flag{t1m1ng_l34ks_p1ns}");
        return 4;
    }
    puts("wrong pin");
    return matched;
}
