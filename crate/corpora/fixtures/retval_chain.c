typedef struct _IO_FILE FILE;
typedef unsigned long size_t;

extern FILE *stdin;
extern size_t fread(void *ptr, size_t size, size_t nmemb, FILE *stream);
extern int printf(const char *format, ...);
extern void exit(int status);
extern void *memcpy(void *dest, const void *src, size_t n);

int level1(FILE *f) {
  int a;
  fread((char *)&a, 4, 1, f);
  return a;
}

int level2(FILE *f) {
  int b;
  b = level1(f);
  return b;
}

int level3(FILE *f) {
  int c;
  c = level2(f);
  return c;
}

void run(FILE *f, char *d, char *s) {
  int n;
  n = level3(f);
  if (n >= 80) {
    printf("too long\n");
    exit(2);
  }
  memcpy(d, s, n);
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
