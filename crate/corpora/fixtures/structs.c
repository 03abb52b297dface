typedef struct _IO_FILE FILE;
typedef unsigned long size_t;

extern FILE *stdin;
extern size_t fread(void *ptr, size_t size, size_t nmemb, FILE *stream);
extern int printf(const char *format, ...);
extern void exit(int status);
extern void *memcpy(void *dest, const void *src, size_t n);

struct header {
  int len;
  int kind;
};

void run(FILE *f, char *d, char *s) {
  struct header h;
  h.kind = 1;
  fread((char *)&h.len, 4, 1, f);
  if (h.len > 72) {
    exit(1);
  }
  memcpy(d, s, h.len);
}

int main(void) {
  char d[128];
  char s[512];
  int i;
  for (i = 0; i < 512; i = i + 1) {
    s[i] = 'B';
  }
  run(stdin, d, s);
  printf("ok %c\n", d[0]);
  return 0;
}
