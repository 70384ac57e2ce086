# Light field D2GAN codec
